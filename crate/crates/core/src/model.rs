//! Boundary coupling functions, the closed-form constants of the resolvent
//! estimates, the first-order corrector, and the scalar kernels behind the
//! elementary pointwise bounds.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Real boundary coupling `alpha` on the lateral hyperplane.
///
/// The analytic kinds carry closed-form supremum norms; the sampled kind
/// only knows grid maxima, which are lower bounds.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryCoupling {
    /// `alpha(x') = alpha0`.
    Constant { alpha0: f64 },
    /// `alpha(x') = alpha0 + c * beta(|x'|)` where `beta` is the indicator
    /// of a ball of radius `half_width`, smoothed by a C^1 ramp of width
    /// `smoothing` (a sharp step when `smoothing == 0`).
    Step {
        alpha0: f64,
        c: f64,
        half_width: f64,
        smoothing: f64,
    },
    /// `alpha(x') = alpha0 + amplitude * exp(-|x'|^2 / (2 sigma^2))`.
    Gauss {
        alpha0: f64,
        amplitude: f64,
        sigma: f64,
    },
    /// Uniformly sampled values on `[x0, x0 + (n-1) dx]`, one lateral
    /// dimension only.
    Sampled { x0: f64, dx: f64, alpha: Vec<f64> },
}

/// Supremum norms of a coupling and of its lateral gradient.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SupNorms {
    pub alpha: f64,
    /// `+inf` flags a coupling outside `W^1_inf` (sharp step).
    pub grad: f64,
    /// False for sampled couplings, where the maxima are grid lower bounds.
    pub exact: bool,
}

/// Cubic smoothstep on [0, 1].
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

impl BoundaryCoupling {
    pub fn constant(alpha0: f64) -> Self {
        BoundaryCoupling::Constant { alpha0 }
    }

    /// Parse a sampled coupling from CSV text with header `x,alpha`.
    pub fn sampled_from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty sampled-coupling file".into()))?;
        if header.trim() != "x,alpha" {
            return Err(Error::Parse(format!(
                "expected header 'x,alpha', got '{}'",
                header.trim()
            )));
        }
        let mut xs = Vec::new();
        let mut vals = Vec::new();
        for line in lines {
            let mut parts = line.split(',');
            let x: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("bad row '{line}'")))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad x in '{line}': {e}")))?;
            let a: f64 = parts
                .next()
                .ok_or_else(|| Error::Parse(format!("bad row '{line}'")))?
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("bad alpha in '{line}': {e}")))?;
            xs.push(x);
            vals.push(a);
        }
        if vals.len() < 2 {
            return Err(Error::InvalidCoupling(
                "sampled coupling needs at least two samples".into(),
            ));
        }
        let dx = xs[1] - xs[0];
        if dx <= 0.0 {
            return Err(Error::InvalidCoupling("sample abscissae must increase".into()));
        }
        for w in xs.windows(2) {
            if ((w[1] - w[0]) - dx).abs() > 1e-9 * dx.abs().max(1.0) {
                return Err(Error::InvalidCoupling("sample grid must be uniform".into()));
            }
        }
        Ok(BoundaryCoupling::Sampled {
            x0: xs[0],
            dx,
            alpha: vals,
        })
    }

    fn validate_inner(&self) -> Result<()> {
        match self {
            BoundaryCoupling::Constant { alpha0 } => {
                if !alpha0.is_finite() {
                    return Err(Error::InvalidCoupling("alpha0 must be finite".into()));
                }
            }
            BoundaryCoupling::Step {
                alpha0,
                c,
                half_width,
                smoothing,
            } => {
                if !(alpha0.is_finite() && c.is_finite()) {
                    return Err(Error::InvalidCoupling("parameters must be finite".into()));
                }
                if *half_width <= 0.0 {
                    return Err(Error::InvalidCoupling("half_width must be positive".into()));
                }
                if *smoothing < 0.0 {
                    return Err(Error::InvalidCoupling("smoothing must be nonnegative".into()));
                }
            }
            BoundaryCoupling::Gauss {
                alpha0,
                amplitude,
                sigma,
            } => {
                if !(alpha0.is_finite() && amplitude.is_finite()) {
                    return Err(Error::InvalidCoupling("parameters must be finite".into()));
                }
                if *sigma <= 0.0 {
                    return Err(Error::InvalidCoupling("sigma must be positive".into()));
                }
            }
            BoundaryCoupling::Sampled { dx, alpha, .. } => {
                if alpha.len() < 2 || *dx <= 0.0 {
                    return Err(Error::InvalidCoupling("bad sampled coupling".into()));
                }
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_inner()
    }

    /// Baseline constant of the coupling at lateral infinity.
    pub fn alpha0(&self) -> f64 {
        match self {
            BoundaryCoupling::Constant { alpha0 }
            | BoundaryCoupling::Step { alpha0, .. }
            | BoundaryCoupling::Gauss { alpha0, .. } => *alpha0,
            BoundaryCoupling::Sampled { alpha, .. } => *alpha.last().unwrap_or(&0.0),
        }
    }

    pub fn is_constant(&self) -> bool {
        match self {
            BoundaryCoupling::Constant { .. } => true,
            BoundaryCoupling::Step { c, .. } => *c == 0.0,
            BoundaryCoupling::Gauss { amplitude, .. } => *amplitude == 0.0,
            BoundaryCoupling::Sampled { alpha, .. } => {
                alpha.windows(2).all(|w| w[0] == w[1])
            }
        }
    }

    /// Evaluate `alpha` at the lateral point `xp` (length d-1).
    pub fn eval(&self, xp: &[f64]) -> Result<f64> {
        if xp.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("non-finite lateral point".into()));
        }
        let r = xp.iter().map(|x| x * x).sum::<f64>().sqrt();
        match self {
            BoundaryCoupling::Constant { alpha0 } => Ok(*alpha0),
            BoundaryCoupling::Step {
                alpha0,
                c,
                half_width,
                smoothing,
            } => {
                let beta = if r <= *half_width {
                    1.0
                } else if *smoothing > 0.0 && r < half_width + smoothing {
                    1.0 - smoothstep((r - half_width) / smoothing)
                } else {
                    0.0
                };
                Ok(alpha0 + c * beta)
            }
            BoundaryCoupling::Gauss {
                alpha0,
                amplitude,
                sigma,
            } => Ok(alpha0 + amplitude * (-r * r / (2.0 * sigma * sigma)).exp()),
            BoundaryCoupling::Sampled { x0, dx, alpha } => {
                if xp.len() != 1 {
                    return Err(Error::Domain(
                        "sampled couplings are one-dimensional".into(),
                    ));
                }
                let x = xp[0];
                let xmax = x0 + dx * (alpha.len() - 1) as f64;
                if x < *x0 - 1e-12 || x > xmax + 1e-12 {
                    return Err(Error::Domain(format!(
                        "query {x} outside sample box [{x0}, {xmax}]"
                    )));
                }
                let s = ((x - x0) / dx).clamp(0.0, (alpha.len() - 1) as f64);
                let i = (s.floor() as usize).min(alpha.len() - 2);
                let t = s - i as f64;
                Ok(alpha[i] * (1.0 - t) + alpha[i + 1] * t)
            }
        }
    }

    /// `(sup |alpha|, sup |grad alpha|)` with an exactness flag.
    pub fn sup_norms(&self) -> SupNorms {
        match self {
            BoundaryCoupling::Constant { alpha0 } => SupNorms {
                alpha: alpha0.abs(),
                grad: 0.0,
                exact: true,
            },
            BoundaryCoupling::Step {
                alpha0,
                c,
                smoothing,
                ..
            } => {
                let grad = if *c == 0.0 {
                    0.0
                } else if *smoothing > 0.0 {
                    // max slope of the cubic ramp is 3/2 over the ramp width
                    1.5 * c.abs() / smoothing
                } else {
                    f64::INFINITY
                };
                SupNorms {
                    alpha: alpha0.abs().max((alpha0 + c).abs()),
                    grad,
                    exact: true,
                }
            }
            BoundaryCoupling::Gauss {
                alpha0,
                amplitude,
                sigma,
            } => SupNorms {
                alpha: alpha0.abs().max((alpha0 + amplitude).abs()),
                // |d/dr (A e^{-r^2/2s^2})| peaks at r = sigma
                grad: amplitude.abs() * (-0.5f64).exp() / sigma,
                exact: true,
            },
            BoundaryCoupling::Sampled { dx, alpha, .. } => {
                let amax = alpha.iter().fold(0.0f64, |m, a| m.max(a.abs()));
                let mut gmax = 0.0f64;
                for i in 1..alpha.len() - 1 {
                    gmax = gmax.max(((alpha[i + 1] - alpha[i - 1]) / (2.0 * dx)).abs());
                }
                SupNorms {
                    alpha: amax,
                    grad: gmax,
                    exact: false,
                }
            }
        }
    }

    /// Integral over the real line of the perturbation profile `beta`
    /// (step kind only; the profile integrates to `2 half_width + smoothing`).
    pub fn step_profile_integral(&self) -> Option<f64> {
        match self {
            BoundaryCoupling::Step {
                half_width,
                smoothing,
                ..
            } => Some(2.0 * half_width + smoothing),
            _ => None,
        }
    }
}

/// The quadruple of closed-form constants controlling the resolvent
/// estimates at layer width `epsilon`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct TheoremConstants {
    /// Constant of the plain L2 resolvent estimate.
    pub c: f64,
    /// Constant of the corrected W1 resolvent estimate, `C(eps)`.
    pub c_eps: f64,
    /// Inner constant `C1(eps)`.
    pub c1_eps: f64,
    /// `C0 = (|grad alpha|_inf + |alpha|_inf) / sqrt(3)`.
    pub c0: f64,
    pub epsilon: f64,
}

/// Evaluate the constants from the supremum norms directly.
pub fn theorem_constants_from_norms(alpha_sup: f64, grad_sup: f64, epsilon: f64) -> TheoremConstants {
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    let c = (1.0 / pi2 + (grad_sup + 2.0 * alpha_sup).powi(2) / 3.0).sqrt();
    let c0 = (grad_sup + alpha_sup) / 3.0f64.sqrt();
    let t = epsilon * alpha_sup * alpha_sup / (2.0 * 5.0f64.sqrt());
    let c1_eps = (t * t
        + (t + alpha_sup * (alpha_sup * alpha_sup + grad_sup * grad_sup * epsilon * epsilon).sqrt()
            / 3.0f64.sqrt())
        .powi(2))
    .sqrt();
    let c_eps = (1.0 / pi2 + (c0 + c1_eps).powi(2)).sqrt();
    TheoremConstants {
        c,
        c_eps,
        c1_eps,
        c0,
        epsilon,
    }
}

/// Evaluate the constants for a coupling, rejecting couplings outside
/// `W^1_inf`.
pub fn theorem_constants(coupling: &BoundaryCoupling, epsilon: f64) -> Result<TheoremConstants> {
    coupling.validate()?;
    if epsilon <= 0.0 || !epsilon.is_finite() {
        return Err(Error::Domain("epsilon must be positive".into()));
    }
    let norms = coupling.sup_norms();
    if !norms.grad.is_finite() {
        return Err(Error::HypothesisViolated(
            "coupling gradient is unbounded (sharp step); use smoothing > 0".into(),
        ));
    }
    Ok(theorem_constants_from_norms(norms.alpha, norms.grad, epsilon))
}

/// First-order corrector multiplier `Q(x', x_d) = -i alpha(x') x_d`.
#[derive(Debug, Clone, Copy)]
pub struct Corrector<'a> {
    pub coupling: &'a BoundaryCoupling,
}

impl<'a> Corrector<'a> {
    pub fn new(coupling: &'a BoundaryCoupling) -> Self {
        Corrector { coupling }
    }

    pub fn eval(&self, xp: &[f64], xd: f64) -> Result<Complex64> {
        let a = self.coupling.eval(xp)?;
        Ok(Complex64::new(0.0, -a * xd))
    }
}

/// Left- and right-hand sides of the three elementary pointwise bounds,
/// with the supremum norms replaced by the pointwise values `|a|`, `g`.
#[derive(Debug, Clone, Copy)]
pub struct Lemma22Kernels {
    pub lhs1: f64,
    pub rhs1: f64,
    pub lhs2: f64,
    pub rhs2: f64,
    pub lhs3: f64,
    pub rhs3: f64,
}

/// Evaluate the three bound pairs at coupling value `a`, gradient magnitude
/// `g` and transverse coordinate `xd >= 0`.
///
/// The third left-hand side uses the gradient identity
/// `grad(e^{-i a x_d} - 1 + i a x_d) = i (1 - e^{-i a x_d}) (x_d g, a)`.
pub fn lemma22_kernels(a: f64, g: f64, xd: f64) -> Lemma22Kernels {
    let phase = Complex64::new(0.0, -a * xd).exp();
    let lhs1 = (phase - 1.0).norm();
    let rhs1 = a.abs() * xd;
    let lhs2 = (phase - 1.0 + Complex64::new(0.0, a * xd)).norm();
    let rhs2 = 0.5 * a * a * xd * xd;
    let lhs3 = lhs1 * (xd * g * xd * g + a * a).sqrt();
    let rhs3 = a.abs() * xd * (a * a + g * g * xd * xd).sqrt();
    Lemma22Kernels {
        lhs1,
        rhs1,
        lhs2,
        rhs2,
        lhs3,
        rhs3,
    }
}
