//! Collision kernels: laws of the nonnegative weight vector `A`.
//!
//! A [`KernelSpec`] fixes `N` and the joint law of `(A_1, ..., A_N)`. The
//! module checks the standing admissibility conditions, evaluates the convex
//! function `S(s) = E[sum_j A_j^s] - 1` (with `0^0 = 0`) and its companion
//! `mu(s) = S(s) / s`, and locates the conjugate exponent `q*_gamma`.

use rand::Rng;
use rand_distr::{Distribution, Open01};
use serde::{Deserialize, Serialize};
use statrs::function::beta::ln_beta;

use crate::error::{Error, Result};
use crate::special::pow0;

const PROBABILITY_SUM_TOL: f64 = 1e-12;

/// Law of the weight vector together with `N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub n_children: usize,
    #[serde(flatten)]
    pub law: KernelLaw,
    #[serde(default)]
    pub label: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelLaw {
    /// `A` is almost surely equal to the given vector.
    Deterministic { weights: Vec<f64> },
    /// Finitely many atoms with probabilities summing to one.
    DiscreteMixture { atoms: Vec<Atom> },
    /// One marginal per component; components are independent except for
    /// [`Marginal::ComplementUniformPower`] couplings.
    IndependentComponents { marginals: Vec<Marginal> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub probability: f64,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Constant {
        value: f64,
    },
    /// `U^power` with `U` uniform on `(0, 1)`.
    Uniform01Power {
        power: f64,
    },
    Beta {
        a: f64,
        b: f64,
    },
    /// `(1 - U)^power` where `U` is the uniform driving component `partner`,
    /// which must be a [`Marginal::Uniform01Power`].
    ComplementUniformPower {
        power: f64,
        partner: usize,
    },
}

impl Marginal {
    /// `E[X^s]` with `0^0 = 0`.
    fn moment(&self, s: f64) -> f64 {
        match *self {
            Marginal::Constant { value } => pow0(value, s),
            Marginal::Uniform01Power { power } | Marginal::ComplementUniformPower { power, .. } => {
                1.0 / (power * s + 1.0)
            }
            Marginal::Beta { a, b } => (ln_beta(a + s, b) - ln_beta(a, b)).exp(),
        }
    }

    fn prob_positive(&self) -> f64 {
        match *self {
            Marginal::Constant { value } => (value > 0.0) as u8 as f64,
            _ => 1.0,
        }
    }

    fn prob_zero_or_one(&self) -> f64 {
        match *self {
            Marginal::Constant { value } => (value == 0.0 || value == 1.0) as u8 as f64,
            Marginal::Uniform01Power { power } | Marginal::ComplementUniformPower { power, .. } => {
                (power == 0.0) as u8 as f64
            }
            Marginal::Beta { .. } => 0.0,
        }
    }

    /// `(uniform source, power on U, power on 1 - U)` for uniform-driven components.
    fn uniform_source(&self, index: usize) -> Option<(usize, f64, f64)> {
        match *self {
            Marginal::Uniform01Power { power } => Some((index, power, 0.0)),
            Marginal::ComplementUniformPower { power, partner } => Some((partner, 0.0, power)),
            _ => None,
        }
    }
}

impl KernelSpec {
    pub fn deterministic(label: impl Into<String>, weights: Vec<f64>) -> Self {
        KernelSpec { n_children: weights.len(), law: KernelLaw::Deterministic { weights }, label: label.into() }
    }

    pub fn mixture(label: impl Into<String>, atoms: Vec<(f64, Vec<f64>)>) -> Self {
        let n = atoms.first().map_or(0, |a| a.1.len());
        KernelSpec {
            n_children: n,
            law: KernelLaw::DiscreteMixture {
                atoms: atoms.into_iter().map(|(probability, weights)| Atom { probability, weights }).collect(),
            },
            label: label.into(),
        }
    }

    pub fn independent(label: impl Into<String>, marginals: Vec<Marginal>) -> Self {
        KernelSpec {
            n_children: marginals.len(),
            law: KernelLaw::IndependentComponents { marginals },
            label: label.into(),
        }
    }

    /// `(U^p, (1 - U)^p)`; `p = 1/2` is the classical Kac kernel, `p = 1`
    /// the uniform mass split.
    pub fn complementary_uniform(label: impl Into<String>, power: f64) -> Self {
        Self::independent(
            label,
            vec![Marginal::Uniform01Power { power }, Marginal::ComplementUniformPower { power, partner: 0 }],
        )
    }

    /// `(sqrt(U), sqrt(1 - U))`, which conserves `A_1^2 + A_2^2 = 1`.
    pub fn kac2() -> Self {
        Self::complementary_uniform("kac2", 0.5)
    }

    /// Checks well-formedness. Hypothesis failures are reported by
    /// [`validate_kernel`], not here.
    pub fn check(&self) -> Result<()> {
        let n = self.n_children;
        if n < 2 {
            return Err(Error::invalid(format!("n_children must be at least 2, got {n}")));
        }
        let check_vector = |w: &[f64], what: &str| -> Result<()> {
            if w.len() != n {
                return Err(Error::invalid(format!("{what} has {} entries, expected n_children = {n}", w.len())));
            }
            if let Some(x) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
                return Err(Error::invalid(format!("{what} has a negative or non-finite weight {x}")));
            }
            Ok(())
        };
        match &self.law {
            KernelLaw::Deterministic { weights } => check_vector(weights, "weight vector")?,
            KernelLaw::DiscreteMixture { atoms } => {
                if atoms.is_empty() {
                    return Err(Error::invalid("mixture has no atoms"));
                }
                for (i, atom) in atoms.iter().enumerate() {
                    check_vector(&atom.weights, &format!("atom {i}"))?;
                    if !(atom.probability >= 0.0 && atom.probability <= 1.0) {
                        return Err(Error::invalid(format!(
                            "atom {i} has probability {} outside [0, 1]",
                            atom.probability
                        )));
                    }
                }
                let total: f64 = atoms.iter().map(|a| a.probability).sum();
                if (total - 1.0).abs() > PROBABILITY_SUM_TOL {
                    return Err(Error::invalid(format!("mixture probabilities sum to {total}, not 1")));
                }
            }
            KernelLaw::IndependentComponents { marginals } => {
                if marginals.len() != n {
                    return Err(Error::invalid(format!(
                        "{} marginals given, expected n_children = {n}",
                        marginals.len()
                    )));
                }
                for (i, m) in marginals.iter().enumerate() {
                    match *m {
                        Marginal::Constant { value } if !(value.is_finite() && value >= 0.0) => {
                            return Err(Error::invalid(format!("component {i}: constant {value} must be >= 0")));
                        }
                        Marginal::Uniform01Power { power } if !(power.is_finite() && power >= 0.0) => {
                            return Err(Error::invalid(format!("component {i}: power {power} must be >= 0")));
                        }
                        Marginal::Beta { a, b } if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) => {
                            return Err(Error::invalid(format!("component {i}: Beta({a}, {b}) needs a, b > 0")));
                        }
                        Marginal::ComplementUniformPower { power, partner } => {
                            if !(power.is_finite() && power >= 0.0) {
                                return Err(Error::invalid(format!("component {i}: power {power} must be >= 0")));
                            }
                            if partner == i || !matches!(marginals.get(partner), Some(Marginal::Uniform01Power { .. }))
                            {
                                return Err(Error::invalid(format!(
                                    "component {i}: partner {partner} must be a different uniform-power component"
                                )));
                            }
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(())
    }

    /// Essential supremum of the largest weight.
    pub fn essential_sup(&self) -> f64 {
        match &self.law {
            KernelLaw::IndependentComponents { marginals } => marginals
                .iter()
                .map(|m| match *m {
                    Marginal::Constant { value } => value,
                    _ => 1.0,
                })
                .fold(0.0, f64::max),
            _ => self
                .atoms()
                .unwrap_or_default()
                .iter()
                .filter(|(p, _)| *p > 0.0)
                .flat_map(|(_, w)| w.iter().copied())
                .fold(0.0, f64::max),
        }
    }

    /// Atoms `(probability, weights)` for finitely supported kernels.
    pub fn atoms(&self) -> Option<Vec<(f64, &[f64])>> {
        match &self.law {
            KernelLaw::Deterministic { weights } => Some(vec![(1.0, weights.as_slice())]),
            KernelLaw::DiscreteMixture { atoms } => {
                Some(atoms.iter().map(|a| (a.probability, a.weights.as_slice())).collect())
            }
            KernelLaw::IndependentComponents { .. } => None,
        }
    }

    /// `S(s) = E[sum_j A_j^s] - 1`; `+inf` when the expectation diverges.
    pub fn spectral_total(&self, s: f64) -> f64 {
        let sum = match &self.law {
            KernelLaw::Deterministic { weights } => weights.iter().map(|&a| pow0(a, s)).sum::<f64>(),
            KernelLaw::DiscreteMixture { atoms } => {
                atoms.iter().map(|atom| atom.probability * atom.weights.iter().map(|&a| pow0(a, s)).sum::<f64>()).sum()
            }
            KernelLaw::IndependentComponents { marginals } => marginals.iter().map(|m| m.moment(s)).sum(),
        };
        if sum.is_finite() {
            sum - 1.0
        } else {
            f64::INFINITY
        }
    }

    /// `E[(sum_j A_j^gamma)^2]`.
    pub fn power_sum_second_moment(&self, gamma: f64) -> f64 {
        match &self.law {
            KernelLaw::Deterministic { .. } | KernelLaw::DiscreteMixture { .. } => self
                .atoms()
                .unwrap_or_default()
                .iter()
                .map(|(p, w)| {
                    let s: f64 = w.iter().map(|&a| pow0(a, gamma)).sum();
                    p * s * s
                })
                .sum(),
            KernelLaw::IndependentComponents { marginals } => {
                let mut total = 0.0;
                for (i, mi) in marginals.iter().enumerate() {
                    for (j, mj) in marginals.iter().enumerate() {
                        total += if i == j {
                            mi.moment(2.0 * gamma)
                        } else {
                            match (mi.uniform_source(i), mj.uniform_source(j)) {
                                (Some((si, ui, ci)), Some((sj, uj, cj))) if si == sj => {
                                    // E[U^a (1 - U)^b] = B(a + 1, b + 1)
                                    let a = (ui + uj) * gamma;
                                    let b = (ci + cj) * gamma;
                                    ln_beta(a + 1.0, b + 1.0).exp()
                                }
                                _ => mi.moment(gamma) * mj.moment(gamma),
                            }
                        };
                    }
                }
                total
            }
        }
    }

    /// Returns `Some(exact)` when `sum_j A_j^gamma = 1` can be decided exactly.
    pub fn is_conservative(&self, gamma: f64) -> Option<bool> {
        let atoms = self.atoms()?;
        Some(atoms.iter().filter(|(p, _)| *p > 0.0).all(|(_, w)| {
            let s: f64 = w.iter().map(|&a| pow0(a, gamma)).sum();
            (s - 1.0).abs() <= 1e-12
        }))
    }

    /// Sampler for i.i.d. copies of `A`.
    pub fn sampler(&self) -> Result<KernelSampler> {
        self.check()?;
        let kind = match &self.law {
            KernelLaw::Deterministic { weights } => SamplerKind::Fixed(weights.clone()),
            KernelLaw::DiscreteMixture { atoms } => {
                let mut acc = 0.0;
                let cumulative = atoms
                    .iter()
                    .map(|a| {
                        acc += a.probability;
                        acc
                    })
                    .collect();
                SamplerKind::Mixture { cumulative, atoms: atoms.iter().map(|a| a.weights.clone()).collect() }
            }
            KernelLaw::IndependentComponents { marginals } => {
                let mut parts = Vec::with_capacity(marginals.len());
                for (i, m) in marginals.iter().enumerate() {
                    parts.push(match *m {
                        Marginal::Constant { value } => MarginalSampler::Constant(value),
                        Marginal::Uniform01Power { power } => MarginalSampler::UniformPower {
                            power,
                            complements: marginals
                                .iter()
                                .enumerate()
                                .filter_map(|(j, mj)| match *mj {
                                    Marginal::ComplementUniformPower { power, partner } if partner == i => {
                                        Some((j, power))
                                    }
                                    _ => None,
                                })
                                .collect(),
                        },
                        Marginal::Beta { a, b } => MarginalSampler::Beta(
                            rand_distr::Beta::new(a, b).map_err(|e| Error::invalid(e.to_string()))?,
                        ),
                        Marginal::ComplementUniformPower { .. } => MarginalSampler::Coupled,
                    });
                }
                SamplerKind::Independent(parts)
            }
        };
        Ok(KernelSampler { n: self.n_children, kind })
    }
}

/// Draws i.i.d. weight vectors.
#[derive(Clone, Debug)]
pub struct KernelSampler {
    n: usize,
    kind: SamplerKind,
}

#[derive(Clone, Debug)]
enum SamplerKind {
    Fixed(Vec<f64>),
    Mixture { cumulative: Vec<f64>, atoms: Vec<Vec<f64>> },
    Independent(Vec<MarginalSampler>),
}

#[derive(Clone, Debug)]
enum MarginalSampler {
    Constant(f64),
    UniformPower {
        power: f64,
        complements: Vec<(usize, f64)>,
    },
    Beta(rand_distr::Beta<f64>),
    /// Filled in by the partner's uniform draw.
    Coupled,
}

impl KernelSampler {
    pub fn n_children(&self) -> usize {
        self.n
    }

    /// `Some(weights)` when the law is a point mass.
    pub fn fixed(&self) -> Option<&[f64]> {
        match &self.kind {
            SamplerKind::Fixed(w) => Some(w),
            _ => None,
        }
    }

    /// Writes one draw of `A` into `out[..N]`.
    #[inline]
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        match &self.kind {
            SamplerKind::Fixed(w) => out[..self.n].copy_from_slice(w),
            SamplerKind::Mixture { cumulative, atoms } => {
                let u: f64 = rng.random();
                let k = cumulative.partition_point(|&c| c <= u).min(atoms.len() - 1);
                out[..self.n].copy_from_slice(&atoms[k]);
            }
            SamplerKind::Independent(parts) => {
                for (i, part) in parts.iter().enumerate() {
                    match part {
                        MarginalSampler::Constant(c) => out[i] = *c,
                        MarginalSampler::UniformPower { power, complements } => {
                            let u: f64 = Open01.sample(rng);
                            out[i] = upow(u, *power);
                            for &(j, p) in complements {
                                out[j] = upow(1.0 - u, p);
                            }
                        }
                        MarginalSampler::Beta(beta) => out[i] = beta.sample(rng),
                        MarginalSampler::Coupled => {}
                    }
                }
            }
        }
    }
}

#[inline]
fn upow(u: f64, p: f64) -> f64 {
    if p == 0.5 {
        u.sqrt()
    } else if p == 1.0 {
        u
    } else {
        u.powf(p)
    }
}

/// One admissibility condition with its computed value.
#[derive(Clone, Debug, Serialize)]
pub struct ConditionCheck {
    pub name: &'static str,
    pub requirement: &'static str,
    pub value: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidationReport {
    pub label: String,
    pub conditions: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.conditions.iter().filter(|c| !c.passed)
    }
}

/// Evaluates the three standing conditions on the law of `A`:
/// branching is not almost surely trivial, the expected number of positive
/// weights exceeds one, and the weights are not almost surely all in `{0, 1}`.
///
/// A malformed kernel is an `Err`; a hypothesis failure is a report with
/// `passed() == false`.
pub fn validate_kernel(spec: &KernelSpec) -> Result<ValidationReport> {
    spec.check()?;
    // Distribution of the number of positive components, and P{all in {0,1}}.
    let (count_law, all_binary) = match &spec.law {
        KernelLaw::Deterministic { .. } | KernelLaw::DiscreteMixture { .. } => {
            let mut law = vec![0.0; spec.n_children + 1];
            let mut binary = 0.0;
            for (p, w) in spec.atoms().unwrap_or_default() {
                law[w.iter().filter(|&&a| a > 0.0).count()] += p;
                if w.iter().all(|&a| a == 0.0 || a == 1.0) {
                    binary += p;
                }
            }
            (law, binary)
        }
        KernelLaw::IndependentComponents { marginals } => {
            // Coupled components are almost surely positive, so treating them
            // as independent is exact.
            let mut law = vec![1.0];
            for m in marginals {
                let p = m.prob_positive();
                let mut next = vec![0.0; law.len() + 1];
                for (k, q) in law.iter().enumerate() {
                    next[k] += q * (1.0 - p);
                    next[k + 1] += q * p;
                }
                law = next;
            }
            let binary = marginals.iter().map(|m| m.prob_zero_or_one()).product();
            (law, binary)
        }
    };
    let trivial = count_law[0] + count_law.get(1).copied().unwrap_or(0.0);
    let mean_count: f64 = count_law.iter().enumerate().map(|(k, p)| k as f64 * p).sum();
    Ok(ValidationReport {
        label: spec.label.clone(),
        conditions: vec![
            ConditionCheck {
                name: "nontrivial_branching",
                requirement: "P{#positive weights in {0,1}} < 1",
                value: trivial,
                passed: trivial < 1.0 - 1e-12,
            },
            ConditionCheck {
                name: "supercritical_count",
                requirement: "E[#positive weights] > 1",
                value: mean_count,
                passed: mean_count > 1.0 + 1e-12,
            },
            ConditionCheck {
                name: "nondegenerate_weights",
                requirement: "P{all weights in {0,1}} < 1",
                value: all_binary,
                passed: all_binary < 1.0 - 1e-12,
            },
        ],
    })
}

/// `S(s)` and `mu(s) = S(s) / s` at one point.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectralValue {
    pub s: f64,
    pub total: f64,
    /// `None` at `s = 0`.
    pub mu: Option<f64>,
}

pub fn spectral(spec: &KernelSpec, s: f64) -> Result<SpectralValue> {
    if !(s >= 0.0) {
        return Err(Error::domain(format!("spectral function needs s >= 0, got {s}")));
    }
    let total = spec.spectral_total(s);
    Ok(SpectralValue { s, total, mu: (s > 0.0).then(|| total / s) })
}

/// `mu(s)` for `s > 0`.
pub fn mu(spec: &KernelSpec, s: f64) -> Result<f64> {
    if !(s > 0.0) {
        return Err(Error::domain(format!("mu(s) needs s > 0, got {s}")));
    }
    Ok(spec.spectral_total(s) / s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugateSearch {
    pub s_max: f64,
    /// Grid points per side of `gamma` used to bracket the crossing.
    pub grid: usize,
    pub tolerance: f64,
}

impl Default for ConjugateSearch {
    fn default() -> Self {
        ConjugateSearch { s_max: 64.0, grid: 4096, tolerance: 1e-9 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConjugateDiagnostic {
    /// Second crossing found by bisection inside the given bracket.
    Found { lower: f64, upper: f64 },
    /// `mu` is monotone on `(0, s_max]`: no second crossing exists there.
    Monotone,
    /// `mu` turns upwards but has not recrossed `mu(gamma)` by `s_max`.
    CapBinding { s_max: f64 },
    /// `mu` turns but its limit as `s -> inf` stays on the far side of `mu(gamma)`.
    NoRecrossing { asymptote: f64 },
    /// `gamma` is the minimiser of `mu`.
    Tangent,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConjugateExponent {
    pub gamma: f64,
    /// `+inf` when no second solution exists.
    pub value: f64,
    pub diagnostic: ConjugateDiagnostic,
}

/// The solution `q != gamma` of `mu(q) = mu(gamma)`, or `+inf`.
pub fn conjugate_exponent(spec: &KernelSpec, gamma: f64) -> Result<ConjugateExponent> {
    conjugate_exponent_with(spec, gamma, ConjugateSearch::default())
}

pub fn conjugate_exponent_with(spec: &KernelSpec, gamma: f64, search: ConjugateSearch) -> Result<ConjugateExponent> {
    if !(gamma > 0.0) || !(search.s_max > gamma) {
        return Err(Error::domain(format!("need 0 < gamma < s_max, got gamma = {gamma}, s_max = {}", search.s_max)));
    }
    let s_gamma = spec.spectral_total(gamma);
    if !s_gamma.is_finite() {
        return Err(Error::domain(format!("S({gamma}) is infinite")));
    }
    let mu_gamma = s_gamma / gamma;
    // h is convex with h(gamma) = 0; its other zero is q*.
    let h = |q: f64| spec.spectral_total(q) - mu_gamma * q;
    let g = search.grid.max(16);

    let right: Vec<f64> = (1..=g).map(|j| gamma + (search.s_max - gamma) * j as f64 / g as f64).collect();
    let left: Vec<f64> = (1..g).map(|j| gamma * (1.0 - j as f64 / g as f64)).collect();

    let find = |grid: &[f64]| -> Option<(f64, f64)> {
        let mut prev = gamma;
        let mut dipped = false;
        for &q in grid {
            let v = h(q);
            if v < 0.0 {
                dipped = true;
            } else if dipped {
                return Some((prev, q));
            }
            prev = q;
        }
        None
    };

    if let Some((a, b)) = find(&right).or_else(|| find(&left)) {
        let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
        let sign_lo = h(lo) < 0.0;
        while hi - lo > search.tolerance {
            let mid = 0.5 * (lo + hi);
            if (h(mid) < 0.0) == sign_lo {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        return Ok(ConjugateExponent {
            gamma,
            value: 0.5 * (lo + hi),
            diagnostic: ConjugateDiagnostic::Found { lower: a.min(b), upper: a.max(b) },
        });
    }

    let mut profile: Vec<f64> =
        left.iter().rev().chain(std::iter::once(&gamma)).chain(&right).map(|&q| spectral_mu(spec, q)).collect();
    profile.retain(|v| v.is_finite());
    let decreasing = profile.windows(2).all(|w| w[1] <= w[0] + 1e-15);
    let increasing = profile.windows(2).all(|w| w[1] >= w[0] - 1e-15);
    let diagnostic = if decreasing || increasing {
        ConjugateDiagnostic::Monotone
    } else if h(search.s_max) < 0.0 {
        // mu tends to +inf when some weight exceeds 1 with positive
        // probability and to 0 otherwise.
        let asymptote = if spec.essential_sup() > 1.0 { f64::INFINITY } else { 0.0 };
        if asymptote > mu_gamma {
            ConjugateDiagnostic::CapBinding { s_max: search.s_max }
        } else {
            ConjugateDiagnostic::NoRecrossing { asymptote }
        }
    } else {
        ConjugateDiagnostic::Tangent
    };
    Ok(ConjugateExponent { gamma, value: f64::INFINITY, diagnostic })
}

fn spectral_mu(spec: &KernelSpec, q: f64) -> f64 {
    spec.spectral_total(q) / q
}

/// A point `delta` on the requested side of `gamma` with `mu(delta) < mu(gamma)`,
/// i.e. a witness for the self-similar (`above`) or degenerate (`!above`)
/// regime. Returns the grid minimiser of `mu` on that side.
pub fn spectral_gap_witness(spec: &KernelSpec, gamma: f64, above: bool, s_max: f64) -> Option<(f64, f64)> {
    let mu_gamma = spectral_mu(spec, gamma);
    if !mu_gamma.is_finite() {
        return None;
    }
    let g = 2048;
    let points: Vec<f64> = if above {
        (1..=g).map(|j| gamma + (s_max - gamma) * j as f64 / g as f64).collect()
    } else {
        (1..g).map(|j| gamma * j as f64 / g as f64).collect()
    };
    points
        .into_iter()
        .map(|d| (d, spectral_mu(spec, d)))
        .filter(|(_, m)| m.is_finite() && *m < mu_gamma)
        .min_by(|a, b| a.1.total_cmp(&b.1))
}
