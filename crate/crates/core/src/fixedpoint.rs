//! Population dynamics for the mixing measure of the self-similar profile.
//!
//! The mixing law `Y` solves `Y = Theta^{S(gamma)} sum_j A_j^gamma Y_j` in
//! distribution, with `Theta` uniform on `(0, 1)`, `Y_j` i.i.d. copies and
//! `E[Y] = 1`. A population of `P` values is pushed through this map until
//! successive generations are close in Wasserstein-1 distance.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{KernelLaw, KernelSampler, KernelSpec, Marginal};
use crate::metrics::wasserstein_distance;
use crate::montecarlo::scaling_constant_from;
use crate::rng;

const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum UpdateForm {
    /// `Y' = Theta^{S} sum A_j^gamma Y_{k_j}`.
    #[default]
    Theta,
    /// `M' = sum A_j^gamma U_j^{S/(N-1)} M_{k_j}` with `U` Dirichlet(1/(N-1), ...).
    Dirichlet,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FixedPointConfig {
    pub pop_size: usize,
    pub max_sweeps: usize,
    /// Stop once successive sorted populations are this close in W1.
    pub tolerance: f64,
    pub form: UpdateForm,
    pub workers: usize,
}

impl Default for FixedPointConfig {
    fn default() -> Self {
        FixedPointConfig { pop_size: 100_000, max_sweeps: 200, tolerance: 1e-3, form: UpdateForm::Theta, workers: 0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingLaw {
    pub population: Vec<f64>,
    pub gamma: f64,
    pub kernel_label: String,
    pub form: UpdateForm,
    pub sweeps_run: usize,
    pub converged: bool,
    /// W1 distance between the last two generations.
    pub final_distance: f64,
}

impl MixingLaw {
    /// Population concentrated at 1, the mixing law of a conservative kernel.
    pub fn degenerate(pop_size: usize, gamma: f64, kernel_label: &str) -> Self {
        MixingLaw {
            population: vec![1.0; pop_size],
            gamma,
            kernel_label: kernel_label.to_string(),
            form: UpdateForm::Theta,
            sweeps_run: 0,
            converged: true,
            final_distance: 0.0,
        }
    }

    pub fn mean(&self) -> f64 {
        mean(&self.population)
    }
}

/// Pairwise summation keeps the renormalised mean within a few ulps of 1.
fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 64 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

fn mean(v: &[f64]) -> f64 {
    pairwise_sum(v) / v.len() as f64
}

fn check_nondegenerate(spec: &KernelSpec) -> Result<()> {
    let all_zero = match &spec.law {
        KernelLaw::IndependentComponents { marginals } => {
            marginals.iter().all(|m| matches!(m, Marginal::Constant { value } if *value == 0.0))
        }
        _ => {
            spec.atoms().unwrap_or_default().iter().filter(|(p, _)| *p > 0.0).all(|(_, w)| w.iter().all(|&a| a == 0.0))
        }
    };
    if all_zero {
        Err(Error::Degenerate("all weights vanish almost surely, so sum A_j^gamma = 0".into()))
    } else {
        Ok(())
    }
}

/// One generation of the population map, before renormalisation.
struct Sweeper<'a> {
    sampler: KernelSampler,
    gamma: f64,
    /// `S(gamma)` for the Theta form, `S(gamma)/(N-1)` for the Dirichlet form.
    exponent: f64,
    form: UpdateForm,
    dirichlet: Option<rand_distr::Gamma<f64>>,
    previous: &'a [f64],
}

impl Sweeper<'_> {
    fn fill<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let n = self.sampler.n_children();
        let p = self.previous.len();
        let mut a = vec![0.0; n];
        let mut g = vec![0.0; n];
        for slot in out.iter_mut() {
            self.sampler.sample_into(rng, &mut a);
            let value = match self.form {
                UpdateForm::Theta => {
                    let theta: f64 = Open01.sample(rng);
                    let sum: f64 =
                        a.iter().map(|&aj| powg(aj, self.gamma) * self.previous[rng.random_range(0..p)]).sum();
                    theta.powf(self.exponent) * sum
                }
                UpdateForm::Dirichlet => {
                    let gd = self.dirichlet.as_ref().expect("dirichlet sampler");
                    for gj in g.iter_mut() {
                        *gj = gd.sample(rng);
                    }
                    let total: f64 = g.iter().sum();
                    a.iter()
                        .zip(&g)
                        .map(|(&aj, &gj)| {
                            powg(aj, self.gamma)
                                * (gj / total).powf(self.exponent)
                                * self.previous[rng.random_range(0..p)]
                        })
                        .sum()
                }
            };
            *slot = value;
        }
    }
}

#[inline]
fn powg(a: f64, gamma: f64) -> f64 {
    if a == 0.0 {
        0.0
    } else if gamma == 1.0 {
        a
    } else if gamma == 2.0 {
        a * a
    } else {
        a.powf(gamma)
    }
}

/// Applies `sweeps` generations of the update map to `population` and
/// renormalises the mean to 1 after each one. Returns the W1 distance of
/// the last step.
#[allow(clippy::too_many_arguments)]
fn run_sweeps(
    seed: u64,
    spec: &KernelSpec,
    gamma: f64,
    form: UpdateForm,
    population: &mut Vec<f64>,
    first_sweep: usize,
    sweeps: usize,
    tolerance: f64,
    workers: usize,
) -> Result<(usize, f64, bool)> {
    let total = spec.spectral_total(gamma);
    if !total.is_finite() {
        return Err(Error::domain(format!("S({gamma}) is infinite")));
    }
    let nm1 = (spec.n_children - 1) as f64;
    let (exponent, dirichlet) = match form {
        UpdateForm::Theta => (total, None),
        UpdateForm::Dirichlet => {
            (total / nm1, Some(rand_distr::Gamma::new(1.0 / nm1, 1.0).map_err(|e| Error::Numeric(e.to_string()))?))
        }
    };
    let sampler = spec.sampler()?;
    let mut next = vec![0.0; population.len()];
    let mut sorted_prev = population.clone();
    sorted_prev.sort_unstable_by(f64::total_cmp);
    let mut distance = f64::INFINITY;
    let mut done = 0;
    for sweep in first_sweep..first_sweep + sweeps {
        let sweeper = Sweeper { sampler: sampler.clone(), gamma, exponent, form, dirichlet, previous: population };
        rng::with_workers(workers, || {
            next.par_chunks_mut(CHUNK).enumerate().for_each(|(c, chunk)| {
                let mut r = rng::substream(seed, sweep as u64, c as u64);
                sweeper.fill(&mut r, chunk);
            })
        });
        let m = mean(&next);
        if !(m > 0.0 && m.is_finite()) {
            return Err(Error::Numeric(format!("population mean became {m} at sweep {sweep}")));
        }
        next.iter_mut().for_each(|y| *y /= m);
        std::mem::swap(population, &mut next);
        let mut sorted = population.clone();
        sorted.sort_unstable_by(f64::total_cmp);
        distance = wasserstein_distance(&sorted, &sorted_prev, 1.0)?.value;
        sorted_prev = sorted;
        done += 1;
        if distance < tolerance {
            return Ok((done, distance, true));
        }
    }
    Ok((done, distance, false))
}

/// Solves for the mixing law by population dynamics, starting from the
/// population concentrated at 1.
///
/// The caller is responsible for the existence regime (some `delta > gamma`
/// with `mu(delta) < mu(gamma)`); without it the run reports non-convergence.
pub fn solve_mixing(seed: u64, spec: &KernelSpec, gamma: f64, config: &FixedPointConfig) -> Result<MixingLaw> {
    spec.check()?;
    check_nondegenerate(spec)?;
    if config.pop_size == 0 {
        return Err(Error::domain("population size must be at least 1"));
    }
    let mut population = vec![1.0; config.pop_size];
    let (sweeps_run, final_distance, converged) = run_sweeps(
        seed,
        spec,
        gamma,
        config.form,
        &mut population,
        0,
        config.max_sweeps,
        config.tolerance,
        config.workers,
    )?;
    Ok(MixingLaw {
        population,
        gamma,
        kernel_label: spec.label.clone(),
        form: config.form,
        sweeps_run,
        converged,
        final_distance,
    })
}

/// Applies one more sweep to a solved population and returns the W1 change.
pub fn extra_sweep_distance(seed: u64, spec: &KernelSpec, mixing: &MixingLaw, workers: usize) -> Result<f64> {
    let mut population = mixing.population.clone();
    let (_, d, _) =
        run_sweeps(seed, spec, mixing.gamma, mixing.form, &mut population, mixing.sweeps_run, 1, 0.0, workers)?;
    Ok(d)
}

/// Maps a Dirichlet-form population onto the scale of the Theta form by
/// multiplying entry `i` with `c_gamma^gamma Z_i^{S/(N-1)}`, `Z_i ~ Gamma(1/(N-1), 1)`.
pub fn align_dirichlet_population(seed: u64, spec: &KernelSpec, mixing: &MixingLaw) -> Result<Vec<f64>> {
    let gamma = mixing.gamma;
    let total = spec.spectral_total(gamma);
    let nm1 = (spec.n_children - 1) as f64;
    let c = scaling_constant_from(total, spec.n_children, gamma)?.powf(gamma);
    let z = rand_distr::Gamma::new(1.0 / nm1, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let s = total / nm1;
    Ok(mixing
        .population
        .par_chunks(CHUNK)
        .enumerate()
        .flat_map_iter(|(ci, chunk)| {
            let mut r = rng::stream(seed, ci as u64);
            chunk.iter().map(|&m| c * z.sample(&mut r).powf(s) * m).collect::<Vec<_>>()
        })
        .collect())
}

/// `E[Y^2]` for the mixing law, or `+inf` when it diverges.
///
/// Squaring the fixed-point equation and using `E[Y] = 1` gives
/// `E[Y^2] = C / (2 S(gamma) + 1 - S_2)` with `S_2 = E[sum A_j^{2 gamma}]` and
/// `C = E[sum_{i != j} A_i^gamma A_j^gamma]`; the same value is also computed
/// as `r C / (1 - r S_2)`, `r = E[Theta^{2 S}] = 1/(2 S + 1)`.
pub fn exact_second_moment(spec: &KernelSpec, gamma: f64) -> Result<f64> {
    spec.check()?;
    // Y = 1 a.s.; skips rounding in the closed form.
    if spec.is_conservative(gamma) == Some(true) {
        return Ok(1.0);
    }
    let total = spec.spectral_total(gamma);
    let s2 = spec.spectral_total(2.0 * gamma) + 1.0;
    if !total.is_finite() || !s2.is_finite() {
        return Err(Error::domain(format!("S({gamma}) or S({}) is infinite", 2.0 * gamma)));
    }
    let cross = spec.power_sum_second_moment(gamma) - s2;
    if 2.0 * total + 1.0 <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let denominator = 2.0 * total + 1.0 - s2;
    if denominator <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let direct = cross / denominator;
    let r = 1.0 / (2.0 * total + 1.0);
    let via_theta = r * cross / (1.0 - r * s2);
    if (direct - via_theta).abs() > 1e-12 * direct.abs().max(1.0) {
        return Err(Error::Numeric(format!("second-moment routes disagree: {direct} vs {via_theta}")));
    }
    Ok(direct)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    /// Order `p / gamma` of the moment of `Y`.
    pub order: f64,
    pub estimate: f64,
    /// `p < q*_gamma`.
    pub predicted_finite: bool,
    /// Estimates on the leading `P/4`, `P/2` and `P` entries, reported when
    /// the moment is predicted infinite.
    pub nested: Option<[f64; 3]>,
    /// Whether `nested` increases, as it should for a divergent moment.
    pub growing: Option<bool>,
}

/// Empirical `E[Y^{p/gamma}]` of the population with the finiteness prediction.
pub fn mixing_moment(mixing: &MixingLaw, p_over_gamma: f64, q_star: f64) -> Result<MomentEstimate> {
    let pop = &mixing.population;
    if pop.is_empty() {
        return Err(Error::State("mixing population is empty".into()));
    }
    let moment = |v: &[f64]| {
        if p_over_gamma == 1.0 {
            mean(v)
        } else {
            pairwise_sum(&v.iter().map(|y| y.powf(p_over_gamma)).collect::<Vec<_>>()) / v.len() as f64
        }
    };
    let p = p_over_gamma * mixing.gamma;
    let predicted_finite = p < q_star;
    let (nested, growing) = if predicted_finite {
        (None, None)
    } else {
        let n = pop.len();
        let est = [moment(&pop[..(n / 4).max(1)]), moment(&pop[..(n / 2).max(1)]), moment(pop)];
        (Some(est), Some(est[0] < est[1] && est[1] < est[2]))
    };
    Ok(MomentEstimate { order: p_over_gamma, estimate: moment(pop), predicted_finite, nested, growing })
}

/// Both sides of the Beta-Gamma-Dirichlet identity
/// `(Z U_1, ..., Z U_N) = (V Z_1, ..., V Z_N)` in law, where `Z, Z_j` are
/// `Gamma(1/(N-1), 1)`, `U` is Dirichlet(1/(N-1), ...) and `V` is
/// `Beta(1/(N-1), 1)`. Rows are stored contiguously, `N` values per draw.
pub fn dirichlet_identity_samples(seed: u64, n_children: usize, count: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    if n_children < 2 {
        return Err(Error::domain("N must be at least 2"));
    }
    let b = 1.0 / (n_children - 1) as f64;
    let gamma = rand_distr::Gamma::new(b, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let beta = rand_distr::Beta::new(b, 1.0).map_err(|e| Error::Numeric(e.to_string()))?;
    let mut lhs = vec![0.0; count * n_children];
    let mut rhs = vec![0.0; count * n_children];
    let mut r = rng::stream(seed, 0);
    let mut g = vec![0.0; n_children];
    for i in 0..count {
        for gj in g.iter_mut() {
            *gj = gamma.sample(&mut r);
        }
        let sum: f64 = g.iter().sum();
        let z = gamma.sample(&mut r);
        for j in 0..n_children {
            lhs[i * n_children + j] = z * g[j] / sum;
        }
        let v = beta.sample(&mut r);
        for j in 0..n_children {
            rhs[i * n_children + j] = v * gamma.sample(&mut r);
        }
    }
    Ok((lhs, rhs))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(form: UpdateForm) -> FixedPointConfig {
        FixedPointConfig { pop_size: 20_000, max_sweeps: 100, tolerance: 2e-3, form, workers: 1 }
    }

    #[test]
    fn second_moment_examples() {
        let k = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        assert!((exact_second_moment(&k, 1.0).unwrap() - 1.12).abs() < 1e-12);
        assert!((exact_second_moment(&KernelSpec::kac2(), 2.0).unwrap() - 1.0).abs() < 1e-12);
        let split = KernelSpec::complementary_uniform("split", 1.0);
        assert!((exact_second_moment(&split, 1.0).unwrap() - 1.0).abs() < 1e-12);
        // a_gamma(2) = (S(2 gamma) + 1)/(2 S(gamma) + 1) crosses 1 near gamma = 2.48.
        let big = KernelSpec::deterministic("big", vec![1.2, 0.5]);
        assert!(exact_second_moment(&big, 2.0).unwrap().is_finite());
        assert_eq!(exact_second_moment(&big, 3.0).unwrap(), f64::INFINITY);
    }

    #[test]
    fn conservative_kernel_collapses() {
        for spec in [KernelSpec::deterministic("c", vec![0.6, 0.8]), KernelSpec::kac2()] {
            let m = solve_mixing(1, &spec, 2.0, &small(UpdateForm::Theta)).unwrap();
            assert!(m.converged);
            assert!(m.population.iter().all(|y| (y - 1.0).abs() < 1e-6));
        }
    }

    #[test]
    fn mean_is_renormalised() {
        let spec = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let m = solve_mixing(2, &spec, 1.0, &small(UpdateForm::Theta)).unwrap();
        assert!((m.mean() - 1.0).abs() < 1e-9);
        assert!(m.population.iter().all(|&y| y >= 0.0));
        let est = mixing_moment(&m, 1.0, f64::INFINITY).unwrap();
        assert!((est.estimate - 1.0).abs() < 1e-12 && est.predicted_finite);
        let est = mixing_moment(&m, 2.0, f64::INFINITY).unwrap();
        assert!((est.estimate - 1.12).abs() < 0.06, "{}", est.estimate);
    }

    #[test]
    fn degenerate_input_is_rejected() {
        let zero = KernelSpec::deterministic("z", vec![0.0, 0.0]);
        assert!(matches!(solve_mixing(1, &zero, 1.0, &small(UpdateForm::Theta)), Err(Error::Degenerate(_))));
    }

    #[test]
    fn runs_do_not_depend_on_workers() {
        let spec = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let mut cfg = small(UpdateForm::Dirichlet);
        cfg.max_sweeps = 5;
        let a = solve_mixing(3, &spec, 1.0, &cfg).unwrap();
        cfg.workers = 4;
        let b = solve_mixing(3, &spec, 1.0, &cfg).unwrap();
        assert_eq!(a.population, b.population);
    }

    #[test]
    fn divergent_moment_growth_is_reported() {
        let mixing = MixingLaw {
            population: (1..=4000).rev().map(|i| 4001.0 / i as f64).collect(),
            ..MixingLaw::degenerate(0, 1.0, "x")
        };
        let est = mixing_moment(&mixing, 2.0, 1.5).unwrap();
        assert!(!est.predicted_finite);
        assert_eq!(est.growing, Some(true));
    }
}
