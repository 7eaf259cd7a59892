//! Exact-in-law samples of the solution `V_t` and of the limit `V_inf`.
//!
//! `V_t` is built from a tree whose size is the random clock `nu_t`: leaves
//! carry i.i.d. initial values and the draw is `sum beta * X`. Rescaled draws
//! are multiplied by `exp(-mu(gamma) t)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma};

use crate::error::{Error, Result};
use crate::fixedpoint::MixingLaw;
use crate::initial::{HCase, HGammaProfile, InitialLaw, StableSampler};
use crate::kernel::KernelSpec;
use crate::metrics::ks_distance;
use crate::rng;
use crate::special::gamma as gamma_fn;
use crate::trees::TreeGrower;

/// Default cap on the expected number of internal nodes per draw.
pub const DEFAULT_NODE_CAP: f64 = 1e7;

/// Precomputed CDF entries beyond which the table is continued on the fly.
const TABLE_LIMIT: usize = 1 << 22;

/// Law of the clock `nu_t`: negative binomial with
/// `P{nu_t = k} = b_k e^{-t} x^k`, `x = 1 - e^{-(N-1)t}`, `b_k = (1/(N-1))_k / k!`.
#[derive(Clone, Debug)]
pub struct NuSampler {
    t: f64,
    r: f64,
    x: f64,
    /// `cdf[k] = P{nu_t <= k}`.
    cdf: Vec<f64>,
    /// `P{nu_t = cdf.len() - 1}`, kept to continue the table without cancellation.
    last_term: f64,
}

impl NuSampler {
    pub fn new(t: f64, n_children: usize) -> Result<Self> {
        if !(t >= 0.0 && t.is_finite()) {
            return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
        }
        if n_children < 2 {
            return Err(Error::domain("N must be at least 2"));
        }
        let nm1 = (n_children - 1) as f64;
        let r = 1.0 / nm1;
        let x = -(-nm1 * t).exp_m1();
        let mut cdf = Vec::new();
        let mut term = (-t).exp();
        let mut acc = 0.0;
        let mut k = 0usize;
        loop {
            acc += term;
            cdf.push(acc);
            if acc >= 1.0 - 1e-15 || cdf.len() >= TABLE_LIMIT || term == 0.0 {
                break;
            }
            term *= (r + k as f64) / (k as f64 + 1.0) * x;
            k += 1;
        }
        Ok(NuSampler { t, r, x, cdf, last_term: term })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// `E[nu_t] = (e^{(N-1)t} - 1)/(N-1)`.
    pub fn mean(&self) -> f64 {
        self.r * self.x / (1.0 - self.x)
    }

    /// `P{nu_t = k}`.
    pub fn pmf(&self, k: usize) -> f64 {
        if k < self.cdf.len() {
            self.cdf[k] - if k == 0 { 0.0 } else { self.cdf[k - 1] }
        } else {
            let mut term = self.last_term;
            for j in self.cdf.len() - 1..k {
                term *= (self.r + j as f64) / (j as f64 + 1.0) * self.x;
            }
            term
        }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        if k < self.cdf.len() {
            return k;
        }
        // Continue the table past its end without caching.
        let mut j = self.cdf.len() - 1;
        let mut acc = self.cdf[j];
        let mut term = self.last_term;
        loop {
            term *= (self.r + j as f64) / (j as f64 + 1.0) * self.x;
            j += 1;
            let next = acc + term;
            if next > u || next == acc {
                return j;
            }
            acc = next;
        }
    }
}

pub fn sample_nu<R: Rng + ?Sized>(rng: &mut R, t: f64, n_children: usize) -> Result<usize> {
    Ok(NuSampler::new(t, n_children)?.sample(rng))
}

/// Draws `V_t` (optionally rescaled) for one scenario.
#[derive(Clone, Debug)]
pub struct SolutionSampler {
    grower: TreeGrower,
    nu: NuSampler,
    law: InitialLaw,
    scale: f64,
}

impl SolutionSampler {
    pub fn new(spec: &KernelSpec, law: &InitialLaw, t: f64, rescale: Option<f64>) -> Result<Self> {
        Self::with_node_cap(spec, law, t, rescale, DEFAULT_NODE_CAP)
    }

    pub fn with_node_cap(
        spec: &KernelSpec,
        law: &InitialLaw,
        t: f64,
        rescale: Option<f64>,
        node_cap: f64,
    ) -> Result<Self> {
        law.check()?;
        let nu = NuSampler::new(t, spec.n_children)?;
        if nu.mean() > node_cap {
            return Err(Error::Budget(format!(
                "t = {t} needs about {:.3e} internal nodes per draw, above the cap {node_cap:.3e}",
                nu.mean()
            )));
        }
        let scale = match rescale {
            None => 1.0,
            Some(gamma) => {
                if !(gamma > 0.0) {
                    return Err(Error::domain(format!("rescaling exponent must be positive, got {gamma}")));
                }
                let total = spec.spectral_total(gamma);
                if !total.is_finite() {
                    return Err(Error::domain(format!("S({gamma}) is infinite; cannot rescale")));
                }
                (-total / gamma * t).exp()
            }
        };
        Ok(SolutionSampler { grower: TreeGrower::new(spec)?, nu, law: law.clone(), scale })
    }

    pub fn nu(&self) -> &NuSampler {
        &self.nu
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> f64 {
        let k = self.nu.sample(rng);
        let tree = self.grower.grow(rng, k);
        let w = match self.law {
            InitialLaw::PointMass { m0 } => m0 * tree.leaf_weights.iter().sum::<f64>(),
            _ => tree.leaf_weights.iter().map(|&b| b * self.law.sample(rng)).sum(),
        };
        self.scale * w
    }
}

pub fn sample_solution<R: Rng + ?Sized>(
    rng: &mut R,
    spec: &KernelSpec,
    law: &InitialLaw,
    t: f64,
    rescale: Option<f64>,
) -> Result<f64> {
    Ok(SolutionSampler::new(spec, law, t, rescale)?.sample(rng))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeMark {
    Finite(f64),
    /// The `t -> inf` limit; serialised as the string `"infinity"`.
    #[serde(with = "infinity_marker")]
    Infinity,
}

mod infinity_marker {
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str("infinity")
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(), D::Error> {
        let s = String::deserialize(d)?;
        if s == "infinity" {
            Ok(())
        } else {
            Err(D::Error::custom(format!("expected \"infinity\", got {s:?}")))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleBatch {
    pub values: Vec<f64>,
    pub t: TimeMark,
    pub rescale_gamma: Option<f64>,
    pub seed: u64,
    pub kernel_label: String,
    pub law_label: String,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sorted_values(&self) -> Vec<f64> {
        let mut v = self.values.clone();
        v.sort_unstable_by(f64::total_cmp);
        v
    }
}

/// `count` i.i.d. draws of `V_t`; draw `i` uses stream `i` of `seed`, so the
/// output does not depend on `workers`.
pub fn sample_batch(
    seed: u64,
    spec: &KernelSpec,
    law: &InitialLaw,
    t: f64,
    rescale: Option<f64>,
    count: usize,
    workers: usize,
) -> Result<SampleBatch> {
    let sampler = SolutionSampler::new(spec, law, t, rescale)?;
    sample_batch_with(seed, &sampler, spec, law, rescale, count, workers)
}

pub fn sample_batch_with(
    seed: u64,
    sampler: &SolutionSampler,
    spec: &KernelSpec,
    law: &InitialLaw,
    rescale: Option<f64>,
    count: usize,
    workers: usize,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::domain("batch count must be at least 1"));
    }
    let values: Vec<f64> = rng::with_workers(workers, || {
        (0..count)
            .into_par_iter()
            .map_init(
                || sampler.clone(),
                |s, i| {
                    let mut r = rng::stream(seed, i as u64);
                    s.sample(&mut r)
                },
            )
            .collect()
    });
    if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("non-finite draw {bad}")));
    }
    Ok(SampleBatch {
        values,
        t: TimeMark::Finite(sampler.nu.t()),
        rescale_gamma: rescale,
        seed,
        kernel_label: spec.label.clone(),
        law_label: law.label(),
    })
}

/// Draws `V_inf = Y^{1/gamma} G` with `Y` from the mixing population and `G`
/// from the attracting stable law (`m0 * Y` in the finite-mean case).
#[derive(Clone, Debug)]
pub struct LimitSampler<'a> {
    population: &'a [f64],
    gamma: f64,
    stable: StableSampler,
    finite_mean: Option<f64>,
}

impl<'a> LimitSampler<'a> {
    pub fn new(mixing: &'a MixingLaw, profile: &HGammaProfile) -> Result<Self> {
        if mixing.population.is_empty() {
            return Err(Error::State("mixing population is empty".into()));
        }
        Ok(LimitSampler {
            population: &mixing.population,
            gamma: profile.gamma,
            stable: StableSampler::new(profile)?,
            finite_mean: match profile.case {
                HCase::FiniteMean { m0 } => Some(m0),
                _ => None,
            },
        })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let y = self.population[rng.random_range(0..self.population.len())];
        match self.finite_mean {
            Some(m0) => m0 * y,
            None => y.powf(1.0 / self.gamma) * self.stable.sample(rng),
        }
    }
}

pub fn sample_limit<R: Rng + ?Sized>(rng: &mut R, mixing: &MixingLaw, profile: &HGammaProfile) -> Result<f64> {
    Ok(LimitSampler::new(mixing, profile)?.sample(rng))
}

pub fn sample_limit_batch(
    seed: u64,
    mixing: &MixingLaw,
    profile: &HGammaProfile,
    count: usize,
    workers: usize,
    law_label: &str,
) -> Result<SampleBatch> {
    if count == 0 {
        return Err(Error::domain("batch count must be at least 1"));
    }
    let sampler = LimitSampler::new(mixing, profile)?;
    let values = rng::with_workers(workers, || {
        (0..count).into_par_iter().map(|i| sampler.sample(&mut rng::stream(seed, i as u64))).collect()
    });
    Ok(SampleBatch {
        values,
        t: TimeMark::Infinity,
        rescale_gamma: Some(profile.gamma),
        seed,
        kernel_label: mixing.kernel_label.clone(),
        law_label: law_label.to_string(),
    })
}

/// `c_gamma = (Gamma(1/(N-1)) / Gamma((S(gamma)+1)/(N-1)))^{1/gamma}`.
pub fn scaling_constant(spec: &KernelSpec, gamma: f64) -> Result<f64> {
    scaling_constant_from(spec.spectral_total(gamma), spec.n_children, gamma)
}

pub fn scaling_constant_from(total: f64, n_children: usize, gamma: f64) -> Result<f64> {
    if !total.is_finite() || total <= -1.0 {
        return Err(Error::domain(format!("scaling constant needs -1 < S(gamma) < inf, got {total}")));
    }
    let nm1 = (n_children - 1) as f64;
    Ok((gamma_fn(1.0 / nm1) / gamma_fn((total + 1.0) / nm1)).powf(1.0 / gamma))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClockCheck {
    pub t: f64,
    pub n_children: usize,
    pub count: usize,
    /// KS distance of `nu_t e^{-(N-1)t}` to `Gamma(1/(N-1), 1)`.
    pub ks: f64,
    pub warning: Option<String>,
}

pub fn gamma_clock_check(seed: u64, t: f64, n_children: usize, count: usize, workers: usize) -> Result<ClockCheck> {
    if count == 0 {
        return Err(Error::domain("count must be at least 1"));
    }
    let nu = NuSampler::new(t, n_children)?;
    let nm1 = (n_children - 1) as f64;
    let factor = (-nm1 * t).exp();
    let draws: Vec<f64> = rng::with_workers(workers, || {
        (0..count).into_par_iter().map(|i| nu.sample(&mut rng::stream(seed, i as u64)) as f64 * factor).collect()
    });
    let limit = Gamma::new(1.0 / nm1, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let ks = ks_distance(&draws, |x| if x <= 0.0 { 0.0 } else { limit.cdf(x) })?;
    Ok(ClockCheck {
        t,
        n_children,
        count,
        ks,
        warning: (factor >= 0.05)
            .then(|| format!("e^(-(N-1)t) = {factor:.3} is not small; the Gamma limit is a poor approximation")),
    })
}
