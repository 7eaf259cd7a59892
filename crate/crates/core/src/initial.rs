//! Initial data `F_0`, their stable-attraction classification and stable laws.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp1, Open01, StandardNormal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::special::gamma as gamma_fn;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum InitialLaw {
    /// Centred normal with standard deviation `sigma`.
    Gaussian {
        sigma: f64,
    },
    PointMass {
        m0: f64,
    },
    /// `+1` or `-1` with probability one half.
    Rademacher,
    /// Pure power tails `P{|X| > x} = 2 c0 x^{-gamma}` for `x >= x0 = (2 c0)^{1/gamma}`,
    /// no mass inside `(-x0, x0)`.
    SymmetricPareto {
        gamma: f64,
        c0: f64,
    },
    /// Tails `c_plus x^{-gamma}` and `c_minus |x|^{-gamma}` beyond
    /// `x0 = (c_plus + c_minus)^{1/gamma}`, shifted to mean zero when `gamma > 1`.
    SkewPareto {
        gamma: f64,
        c_plus: f64,
        c_minus: f64,
    },
}

impl InitialLaw {
    pub fn check(&self) -> Result<()> {
        let ok = match *self {
            InitialLaw::Gaussian { sigma } => sigma.is_finite() && sigma >= 0.0,
            InitialLaw::PointMass { m0 } => m0.is_finite(),
            InitialLaw::Rademacher => true,
            InitialLaw::SymmetricPareto { gamma, c0 } => gamma > 0.0 && gamma < 2.0 && c0 > 0.0 && c0.is_finite(),
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } => {
                gamma > 0.0
                    && gamma < 2.0
                    && c_plus >= 0.0
                    && c_minus >= 0.0
                    && c_plus + c_minus > 0.0
                    && (c_plus + c_minus).is_finite()
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid initial law parameters: {self:?}")))
        }
    }

    pub fn label(&self) -> String {
        match *self {
            InitialLaw::Gaussian { sigma } => format!("gaussian(sigma={sigma})"),
            InitialLaw::PointMass { m0 } => format!("point_mass({m0})"),
            InitialLaw::Rademacher => "rademacher".into(),
            InitialLaw::SymmetricPareto { gamma, c0 } => format!("symmetric_pareto(gamma={gamma},c0={c0})"),
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } => {
                format!("skew_pareto(gamma={gamma},c+={c_plus},c-={c_minus})")
            }
        }
    }

    /// Inner cutoff `x0` of the Pareto families.
    pub fn cutoff(&self) -> Option<f64> {
        match *self {
            InitialLaw::SymmetricPareto { gamma, c0 } => Some((2.0 * c0).powf(1.0 / gamma)),
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } => Some((c_plus + c_minus).powf(1.0 / gamma)),
            _ => None,
        }
    }

    /// Location shift subtracted from the raw skew Pareto variable.
    fn shift(&self) -> f64 {
        match *self {
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } if gamma > 1.0 => {
                let x0 = (c_plus + c_minus).powf(1.0 / gamma);
                (c_plus - c_minus) * gamma * x0.powf(1.0 - gamma) / (gamma - 1.0)
            }
            _ => 0.0,
        }
    }

    /// Draws one value from `F_0`.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            InitialLaw::Gaussian { sigma } => {
                let z: f64 = StandardNormal.sample(rng);
                sigma * z
            }
            InitialLaw::PointMass { m0 } => m0,
            InitialLaw::Rademacher => {
                if rng.random::<bool>() {
                    1.0
                } else {
                    -1.0
                }
            }
            InitialLaw::SymmetricPareto { gamma, c0 } => {
                let x0 = (2.0 * c0).powf(1.0 / gamma);
                let magnitude = pareto_magnitude(rng, x0, gamma);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } => {
                let total = c_plus + c_minus;
                let x0 = total.powf(1.0 / gamma);
                let magnitude = pareto_magnitude(rng, x0, gamma);
                let positive = rng.random::<f64>() * total < c_plus;
                (if positive { magnitude } else { -magnitude }) - self.shift()
            }
        }
    }

    /// Distribution function of `F_0`.
    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            InitialLaw::Gaussian { sigma } => {
                if sigma == 0.0 {
                    (x >= 0.0) as u8 as f64
                } else {
                    Normal::new(0.0, sigma).map(|n| n.cdf(x)).unwrap_or(f64::NAN)
                }
            }
            InitialLaw::PointMass { m0 } => (x >= m0) as u8 as f64,
            InitialLaw::Rademacher => {
                if x < -1.0 {
                    0.0
                } else if x < 1.0 {
                    0.5
                } else {
                    1.0
                }
            }
            InitialLaw::SymmetricPareto { gamma, c0 } => {
                let x0 = (2.0 * c0).powf(1.0 / gamma);
                if x <= -x0 {
                    c0 * (-x).powf(-gamma)
                } else if x < x0 {
                    0.5
                } else {
                    1.0 - c0 * x.powf(-gamma)
                }
            }
            InitialLaw::SkewPareto { gamma, c_plus, c_minus } => {
                let x0 = (c_plus + c_minus).powf(1.0 / gamma);
                let y = x + self.shift();
                if y <= -x0 {
                    c_minus * (-y).powf(-gamma)
                } else if y < x0 {
                    c_minus / (c_plus + c_minus)
                } else {
                    1.0 - c_plus * y.powf(-gamma)
                }
            }
        }
    }

    /// Characteristic function where it has a closed form.
    pub fn analytic_cf(&self, xi: f64) -> Option<Complex64> {
        match *self {
            InitialLaw::Gaussian { sigma } => Some(Complex64::new((-0.5 * sigma * sigma * xi * xi).exp(), 0.0)),
            InitialLaw::PointMass { m0 } => Some(Complex64::from_polar(1.0, m0 * xi)),
            InitialLaw::Rademacher => Some(Complex64::new(xi.cos(), 0.0)),
            _ => None,
        }
    }

    pub fn has_analytic_cf(&self) -> bool {
        self.analytic_cf(0.0).is_some()
    }
}

#[inline]
fn pareto_magnitude<R: Rng + ?Sized>(rng: &mut R, x0: f64, gamma: f64) -> f64 {
    let u: f64 = Open01.sample(rng);
    if gamma == 1.0 {
        x0 / u
    } else {
        x0 * u.powf(-1.0 / gamma)
    }
}

/// Which branch of the attraction hypothesis holds, with its constants.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "case", rename_all = "snake_case")]
pub enum HCase {
    /// `gamma = 1` with finite first moment `m0`.
    FiniteMean { m0: f64 },
    /// `gamma = 1`, symmetric with tail constant `c0`.
    SymmetricCauchy { c0: f64 },
    /// `gamma = 2`, mean zero and variance `sigma2`.
    Gaussian { sigma2: f64 },
    /// `gamma` in `(0, 1) U (1, 2)` with tail constants.
    Stable { c_plus: f64, c_minus: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HGammaProfile {
    pub gamma: f64,
    pub case: HCase,
    /// Scale of `|xi|^gamma` in the exponent of the limit characteristic
    /// function (`pi c0` for Cauchy, `sigma2 / 2` for Gaussian, `0` for a point mass).
    pub k0: f64,
    pub eta0: f64,
}

impl HGammaProfile {
    pub fn finite_mean(m0: f64) -> Self {
        HGammaProfile { gamma: 1.0, case: HCase::FiniteMean { m0 }, k0: 0.0, eta0: 0.0 }
    }

    pub fn cauchy(c0: f64) -> Self {
        HGammaProfile { gamma: 1.0, case: HCase::SymmetricCauchy { c0 }, k0: PI * c0, eta0: 0.0 }
    }

    pub fn gaussian(sigma2: f64) -> Self {
        HGammaProfile { gamma: 2.0, case: HCase::Gaussian { sigma2 }, k0: 0.5 * sigma2, eta0: 0.0 }
    }

    pub fn stable(gamma: f64, c_plus: f64, c_minus: f64) -> Self {
        let sum = c_plus + c_minus;
        HGammaProfile {
            gamma,
            case: HCase::Stable { c_plus, c_minus },
            k0: sum * PI / (2.0 * gamma_fn(gamma) * (PI * gamma / 2.0).sin()),
            eta0: if sum > 0.0 { (c_plus - c_minus) / sum } else { 0.0 },
        }
    }
}

/// Decides which attraction hypothesis `law` satisfies at exponent `gamma`.
pub fn classify(law: &InitialLaw, gamma: f64) -> Result<HGammaProfile> {
    law.check()?;
    if !(gamma > 0.0 && gamma <= 2.0) {
        return Err(Error::Classification(format!("gamma = {gamma} is outside (0, 2]")));
    }
    let fail = |why: &str| Err(Error::Classification(format!("{} at gamma = {gamma}: {why}", law.label())));
    match *law {
        InitialLaw::Gaussian { sigma } => {
            if gamma == 2.0 {
                if sigma > 0.0 {
                    Ok(HGammaProfile::gaussian(sigma * sigma))
                } else {
                    fail("variance must be positive")
                }
            } else if gamma == 1.0 {
                Ok(HGammaProfile::finite_mean(0.0))
            } else {
                fail("tail constants c0+ + c0- must be positive, but the tails are lighter than any power")
            }
        }
        InitialLaw::PointMass { m0 } => {
            if gamma == 1.0 {
                Ok(HGammaProfile::finite_mean(m0))
            } else if gamma == 2.0 {
                fail("variance must be positive")
            } else {
                fail("tail constants c0+ + c0- must be positive for a point mass")
            }
        }
        InitialLaw::Rademacher => {
            if gamma == 1.0 {
                Ok(HGammaProfile::finite_mean(0.0))
            } else if gamma == 2.0 {
                Ok(HGammaProfile::gaussian(1.0))
            } else {
                fail("tail constants c0+ + c0- must be positive, but the law is bounded")
            }
        }
        InitialLaw::SymmetricPareto { gamma: alpha, c0 } => {
            if gamma == alpha {
                if gamma == 1.0 {
                    Ok(HGammaProfile::cauchy(c0))
                } else {
                    Ok(HGammaProfile::stable(gamma, c0, c0))
                }
            } else if gamma == 1.0 && alpha > 1.0 {
                Ok(HGammaProfile::finite_mean(0.0))
            } else {
                fail(&format!("tail exponent is {alpha}"))
            }
        }
        InitialLaw::SkewPareto { gamma: alpha, c_plus, c_minus } => {
            if gamma == alpha {
                if gamma == 1.0 {
                    if c_plus == c_minus {
                        Ok(HGammaProfile::cauchy(c_plus))
                    } else {
                        fail("infinite mean with asymmetric tails")
                    }
                } else {
                    Ok(HGammaProfile::stable(gamma, c_plus, c_minus))
                }
            } else if gamma == 1.0 && alpha > 1.0 {
                Ok(HGammaProfile::finite_mean(0.0))
            } else {
                fail(&format!("tail exponent is {alpha}"))
            }
        }
    }
}

/// Characteristic function of the attracting stable law.
pub fn stable_cf(profile: &HGammaProfile, xi: f64) -> Complex64 {
    match profile.case {
        HCase::FiniteMean { m0 } => Complex64::from_polar(1.0, m0 * xi),
        HCase::SymmetricCauchy { c0 } => Complex64::new((-PI * c0 * xi.abs()).exp(), 0.0),
        HCase::Gaussian { sigma2 } => Complex64::new((-0.5 * sigma2 * xi * xi).exp(), 0.0),
        HCase::Stable { .. } => {
            let g = profile.gamma;
            let a = profile.k0 * xi.abs().powf(g);
            let skew = profile.eta0 * (PI * g / 2.0).tan() * xi.signum();
            (Complex64::new(-a, a * skew)).exp()
        }
    }
}

/// Sampler for the attracting stable law of a profile.
#[derive(Clone, Copy, Debug)]
pub enum StableSampler {
    Constant(f64),
    Cauchy {
        scale: f64,
    },
    Normal {
        sd: f64,
    },
    /// Chambers–Mallows–Stuck with precomputed constants.
    Cms {
        alpha: f64,
        b: f64,
        s: f64,
        scale: f64,
    },
}

impl StableSampler {
    pub fn new(profile: &HGammaProfile) -> Result<Self> {
        Ok(match profile.case {
            HCase::FiniteMean { m0 } => StableSampler::Constant(m0),
            HCase::SymmetricCauchy { c0 } => StableSampler::Cauchy { scale: PI * c0 },
            HCase::Gaussian { sigma2 } => StableSampler::Normal { sd: sigma2.sqrt() },
            HCase::Stable { .. } => {
                let alpha = profile.gamma;
                if alpha == 1.0 {
                    return Err(Error::Unsupported(
                        "stable sampling at gamma = 1 is only available for the symmetric and finite-mean cases".into(),
                    ));
                }
                if alpha == 2.0 {
                    // exp(-k0 xi^2) is a centred normal with variance 2 k0.
                    return Ok(StableSampler::Normal { sd: (2.0 * profile.k0).sqrt() });
                }
                let t = profile.eta0 * (PI * alpha / 2.0).tan();
                StableSampler::Cms {
                    alpha,
                    b: t.atan() / alpha,
                    s: (1.0 + t * t).powf(1.0 / (2.0 * alpha)),
                    scale: profile.k0.powf(1.0 / alpha),
                }
            }
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            StableSampler::Constant(m) => m,
            StableSampler::Cauchy { scale } => {
                let u: f64 = Open01.sample(rng);
                scale * (PI * (u - 0.5)).tan()
            }
            StableSampler::Normal { sd } => {
                let z: f64 = StandardNormal.sample(rng);
                sd * z
            }
            StableSampler::Cms { alpha, b, s, scale } => {
                let u: f64 = Open01.sample(rng);
                let v = PI * (u - 0.5);
                let w: f64 = Exp1.sample(rng);
                let ab = alpha * (v + b);
                let x = s * ab.sin() / v.cos().powf(1.0 / alpha) * ((v - ab).cos() / w).powf((1.0 - alpha) / alpha);
                scale * x
            }
        }
    }
}

pub fn sample_stable<R: Rng + ?Sized>(rng: &mut R, profile: &HGammaProfile) -> Result<f64> {
    Ok(StableSampler::new(profile)?.sample(rng))
}

pub fn sample_initial<R: Rng + ?Sized>(rng: &mut R, law: &InitialLaw) -> f64 {
    law.sample(rng)
}
