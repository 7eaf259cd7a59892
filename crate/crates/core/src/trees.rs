//! Random N-ary recursive trees with multiplicative leaf weights.
//!
//! A tree is grown from a single leaf of weight 1 by repeatedly picking a
//! uniform leaf and turning it into an internal node with `N` children; the
//! children of a leaf with weight `beta` get weights `beta * A_j` for a fresh
//! draw of `A`. Only leaf weights and root-subtree sizes are kept.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{KernelSampler, KernelSpec};
use crate::rng;
use crate::special::{gamma as gamma_fn, ln_gamma, ln_gamma_ratio};

/// Exact rational arithmetic is used up to this many internal nodes.
const EXACT_SHAPE_LIMIT: usize = 20;

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct WeightedTree {
    pub n_children: usize,
    /// Number of internal nodes.
    pub size: usize,
    pub leaf_weights: Vec<f64>,
    /// Internal-node counts of the `N` root subtrees (all zero when `size <= 1`).
    pub subtree_sizes: Vec<usize>,
}

impl WeightedTree {
    pub fn leaf_count(&self) -> usize {
        self.leaf_weights.len()
    }
}

/// Grows trees for one kernel, reusing its buffers between trees.
#[derive(Clone, Debug)]
pub struct TreeGrower {
    sampler: KernelSampler,
    tree: WeightedTree,
    /// Root branch of every leaf, parallel to `tree.leaf_weights`.
    branch: Vec<u32>,
    draw: Vec<f64>,
}

impl TreeGrower {
    pub fn new(spec: &KernelSpec) -> Result<Self> {
        let sampler = spec.sampler()?;
        let n = sampler.n_children();
        Ok(TreeGrower {
            sampler,
            tree: WeightedTree { n_children: n, ..Default::default() },
            branch: Vec::new(),
            draw: vec![0.0; n],
        })
    }

    pub fn tree(&self) -> &WeightedTree {
        &self.tree
    }

    /// Grows a fresh tree with `size` internal nodes.
    pub fn grow<R: Rng + ?Sized>(&mut self, rng: &mut R, size: usize) -> &WeightedTree {
        let n = self.tree.n_children;
        let leaves = &mut self.tree.leaf_weights;
        leaves.clear();
        leaves.reserve((n - 1) * size + 1);
        leaves.push(1.0);
        self.branch.clear();
        self.tree.subtree_sizes.clear();
        self.tree.subtree_sizes.resize(n, 0);
        self.tree.size = size;
        if size == 0 {
            return &self.tree;
        }
        self.sampler.sample_into(rng, &mut self.draw);
        leaves.clear();
        leaves.extend_from_slice(&self.draw);
        self.branch.extend(0..n as u32);
        for _ in 1..size {
            let j = rng.random_range(0..leaves.len());
            let beta = leaves[j];
            let tag = self.branch[j];
            self.sampler.sample_into(rng, &mut self.draw);
            leaves[j] = beta * self.draw[0];
            for a in &self.draw[1..] {
                leaves.push(beta * a);
                self.branch.push(tag);
            }
            self.tree.subtree_sizes[tag as usize] += 1;
        }
        &self.tree
    }
}

pub fn grow_tree<R: Rng + ?Sized>(rng: &mut R, spec: &KernelSpec, size: usize) -> Result<WeightedTree> {
    let mut grower = TreeGrower::new(spec)?;
    grower.grow(rng, size);
    Ok(grower.tree)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ShapeProbability {
    pub value: f64,
    /// Present when computed in rational arithmetic.
    #[serde(skip)]
    pub exact: Option<BigRational>,
}

/// Probability `p_k(i)` that a tree with `k = 1 + sum(i)` internal nodes has
/// root subtrees of sizes `i = (i_1, ..., i_N)`.
pub fn shape_probability(n_children: usize, sizes: &[usize]) -> Result<ShapeProbability> {
    if n_children < 2 || sizes.len() != n_children {
        return Err(Error::domain(format!("expected {n_children} subtree sizes with N >= 2, got {}", sizes.len())));
    }
    let k = sizes.iter().sum::<usize>() + 1;
    let nm1 = n_children - 1;
    if k <= EXACT_SHAPE_LIMIT {
        let f = |m: usize| BigInt::from(nm1 * m + 1);
        let factorial = |m: usize| (1..=m).fold(BigInt::one(), |acc, j| acc * BigInt::from(j));
        let mut num = factorial(k - 1);
        let mut den = BigInt::one();
        for &i in sizes {
            den *= factorial(i);
            for m in 0..i {
                num *= f(m);
            }
        }
        for r in 1..k {
            den *= f(r);
        }
        let exact = BigRational::new(num, den);
        return Ok(ShapeProbability { value: exact.to_f64().unwrap_or(f64::NAN), exact: Some(exact) });
    }
    let b = 1.0 / nm1 as f64;
    let mut log_p = ln_gamma(k as f64) - (nm1 as f64).ln() - ln_gamma(b + k as f64) + ln_gamma(b);
    for &i in sizes {
        log_p += ln_gamma(b + i as f64) - ln_gamma(b) - ln_gamma(i as f64 + 1.0);
    }
    Ok(ShapeProbability { value: log_p.exp(), exact: None })
}

/// All `parts`-tuples of nonnegative integers summing to `total`.
pub fn compositions(total: usize, parts: usize) -> Vec<Vec<usize>> {
    fn rec(total: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if parts == 1 {
            prefix.push(total);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for first in 0..=total {
            prefix.push(first);
            rec(total - first, parts - 1, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if parts > 0 {
        rec(total, parts, &mut Vec::with_capacity(parts), &mut out);
    }
    out
}

/// `m_n(gamma) = E[sum over leaves of beta^gamma]` for a tree of size `n`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightNorm {
    pub n: u64,
    /// `prod_{k < n} (1 + S(gamma) / f_k)`.
    pub product: f64,
    /// `(a)_n / (b)_n` with `a = (S + 1)/(N - 1)`, `b = 1/(N - 1)`, via gamma ratios.
    pub pochhammer: f64,
    /// `n^{S/(N-1)} * Gamma(b) / Gamma(a)`.
    pub asymptotic: f64,
}

impl WeightNorm {
    pub fn value(&self) -> f64 {
        self.product
    }
}

pub fn expected_weight_norm(spec: &KernelSpec, gamma: f64, n: u64) -> Result<WeightNorm> {
    let total = spec.spectral_total(gamma);
    weight_norm_from_total(total, spec.n_children, n)
}

/// [`expected_weight_norm`] given `S(gamma)` directly.
pub fn weight_norm_from_total(total: f64, n_children: usize, n: u64) -> Result<WeightNorm> {
    if !total.is_finite() {
        return Err(Error::domain("S(gamma) is infinite"));
    }
    let nm1 = (n_children - 1) as f64;
    let product = (0..n).fold(1.0, |acc, k| acc * (1.0 + total / (nm1 * k as f64 + 1.0)));
    let a = (total + 1.0) / nm1;
    let b = 1.0 / nm1;
    let (pochhammer, asymptotic) = if a <= 0.0 {
        // All weights vanish: the first factor is zero.
        (if n == 0 { 1.0 } else { 0.0 }, 0.0)
    } else {
        let nf = n as f64;
        (
            (ln_gamma_ratio(a + nf, b + nf) - ln_gamma_ratio(a, b)).exp(),
            nf.powf(total / nm1) * gamma_fn(b) / gamma_fn(a),
        )
    };
    let scale = product.abs().max(pochhammer.abs());
    if scale > 0.0 && (product - pochhammer).abs() > 1e-10 * scale {
        return Err(Error::Numeric(format!(
            "weight norm routes disagree at n = {n}: product {product}, gamma ratio {pochhammer}"
        )));
    }
    Ok(WeightNorm { n, product, pochhammer, asymptotic })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WeightStats {
    pub gamma: f64,
    /// `sum beta^gamma` over the leaves.
    pub m: f64,
    /// `m / m_n(gamma)`.
    pub m_tilde: f64,
    /// `max beta / m_n(gamma)^{1/gamma}`.
    pub beta_max: f64,
}

pub fn weight_stats(tree: &WeightedTree, gamma: f64, spec: &KernelSpec) -> Result<WeightStats> {
    let norm = expected_weight_norm(spec, gamma, tree.size as u64)?;
    Ok(weight_stats_with_norm(tree, gamma, norm.value()))
}

pub fn weight_stats_with_norm(tree: &WeightedTree, gamma: f64, m_n: f64) -> WeightStats {
    let (m, max) = tree.leaf_weights.iter().fold((0.0, 0.0f64), |(s, mx), &b| (s + b.powf(gamma), mx.max(b)));
    WeightStats { gamma, m, m_tilde: m / m_n, beta_max: max / m_n.powf(1.0 / gamma) }
}

/// One grown tree summarised for export.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TreeRecord {
    pub size: usize,
    pub stats: WeightStats,
    pub subtree_sizes: Vec<usize>,
}

/// `count` independent trees of the given size; tree `i` uses stream `i`.
pub fn tree_stats_batch(
    seed: u64,
    spec: &KernelSpec,
    gamma: f64,
    size: usize,
    count: usize,
    workers: usize,
) -> Result<Vec<TreeRecord>> {
    let m_n = expected_weight_norm(spec, gamma, size as u64)?.value();
    let grower = TreeGrower::new(spec)?;
    Ok(rng::with_workers(workers, || {
        (0..count)
            .into_par_iter()
            .map_init(
                || grower.clone(),
                |g, i| {
                    let mut r = rng::stream(seed, i as u64);
                    let tree = g.grow(&mut r, size);
                    TreeRecord {
                        size,
                        stats: weight_stats_with_norm(tree, gamma, m_n),
                        subtree_sizes: tree.subtree_sizes.clone(),
                    }
                },
            )
            .collect()
    }))
}

/// Root-subtree size fractions `i_l / n` for `batch` trees of size `n`.
///
/// Only the urn of per-branch leaf counts is simulated, which has the same
/// law as the subtree sizes of a fully grown tree.
pub fn subtree_fraction_sample<R: Rng + ?Sized>(
    rng: &mut R,
    n_children: usize,
    size: usize,
    batch: usize,
) -> Result<Vec<Vec<f64>>> {
    if size == 0 || n_children < 2 {
        return Err(Error::domain("subtree fractions need n >= 1 and N >= 2"));
    }
    let nm1 = n_children - 1;
    let mut out = Vec::with_capacity(batch);
    let mut leaves = vec![0usize; n_children];
    let mut internal = vec![0usize; n_children];
    for _ in 0..batch {
        leaves.fill(1);
        internal.fill(0);
        let mut total = n_children;
        for _ in 1..size {
            let mut pick = rng.random_range(0..total);
            let mut l = 0;
            while pick >= leaves[l] {
                pick -= leaves[l];
                l += 1;
            }
            leaves[l] += nm1;
            internal[l] += 1;
            total += nm1;
        }
        out.push(internal.iter().map(|&i| i as f64 / size as f64).collect());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_traits::Zero;
    use proptest::prelude::*;

    fn rational(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    #[test]
    fn small_trees() {
        let spec = KernelSpec::deterministic("pq", vec![0.3, 0.9]);
        let mut r = rng::stream(1, 0);
        let t = grow_tree(&mut r, &spec, 0).unwrap();
        assert_eq!(t.leaf_weights, vec![1.0]);
        let t = grow_tree(&mut r, &spec, 1).unwrap();
        assert_eq!(t.leaf_weights, vec![0.3, 0.9]);
        assert_eq!(t.subtree_sizes, vec![0, 0]);
    }

    #[test]
    fn conservative_trees_keep_unit_norm() {
        let mut g = TreeGrower::new(&KernelSpec::kac2()).unwrap();
        let mut r = rng::stream(2, 0);
        for size in [0, 1, 2, 10, 500] {
            let t = g.grow(&mut r, size);
            assert_eq!(t.leaf_count(), size + 1);
            let m: f64 = t.leaf_weights.iter().map(|b| b * b).sum();
            assert!((m - 1.0).abs() < 1e-12);
            if size >= 1 {
                assert_eq!(t.subtree_sizes.iter().sum::<usize>(), size - 1);
            }
        }
    }

    #[test]
    fn shape_probability_examples() {
        let p = shape_probability(2, &[0, 0]).unwrap();
        assert_eq!(p.exact.unwrap(), BigRational::one());
        assert_eq!(shape_probability(2, &[1, 0]).unwrap().exact.unwrap(), rational(1, 2));
        for s in [[2, 0], [1, 1], [0, 2]] {
            assert_eq!(shape_probability(2, &s).unwrap().exact.unwrap(), rational(1, 3));
        }
        assert!(shape_probability(2, &[1, 0, 0]).is_err());
    }

    #[test]
    fn shape_probabilities_sum_to_one_exactly() {
        for n in [2, 3, 4] {
            for k in 1..=8 {
                let total = compositions(k - 1, n)
                    .iter()
                    .map(|s| shape_probability(n, s).unwrap().exact.unwrap())
                    .fold(BigRational::zero(), |a, b| a + b);
                assert_eq!(total, BigRational::one(), "N = {n}, k = {k}");
            }
        }
    }

    #[test]
    fn log_gamma_form_matches_rational_form() {
        // k = 20 is the last rational size; compare the log route there.
        for s in [[19, 0], [10, 9], [3, 16]] {
            let exact = shape_probability(2, &s).unwrap().value;
            assert!((exact - 1.0 / 20.0).abs() < 1e-15);
        }
        for s in [[6, 6, 7], [0, 0, 19], [12, 3, 4]] {
            let exact = shape_probability(3, &s).unwrap().value;
            let b = 0.5;
            let k = 20.0;
            let mut lp = ln_gamma(k) - 2f64.ln() - ln_gamma(b + k) + ln_gamma(b);
            for &i in &s {
                lp += ln_gamma(b + i as f64) - ln_gamma(b) - ln_gamma(i as f64 + 1.0);
            }
            assert!((lp.exp() - exact).abs() < 1e-12 * exact, "{s:?}");
        }
        // Beyond the rational range the probabilities still sum to one.
        let total: f64 = compositions(40, 3).iter().map(|s| shape_probability(3, s).unwrap().value).sum();
        assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn weight_norm_examples() {
        for n in [0u64, 1, 2, 7, 100] {
            let w = weight_norm_from_total(1.0, 2, n).unwrap();
            assert!((w.product - (n as f64 + 1.0)).abs() < 1e-9);
            let w = weight_norm_from_total(0.0, 2, n).unwrap();
            assert_eq!(w.product, 1.0);
            let w = weight_norm_from_total(2.0, 3, n).unwrap();
            assert!((w.product - (2.0 * n as f64 + 1.0)).abs() < 1e-9);
        }
        let w = weight_norm_from_total(0.3, 2, 10_000).unwrap();
        assert!((w.asymptotic / w.product - 1.0).abs() < 1e-3);
        assert!(weight_norm_from_total(f64::INFINITY, 2, 3).is_err());
        assert_eq!(weight_norm_from_total(-1.0, 2, 3).unwrap().product, 0.0);
    }

    #[test]
    fn weight_stats_examples() {
        let spec = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let mut r = rng::stream(3, 0);
        let t = grow_tree(&mut r, &spec, 1).unwrap();
        let s = weight_stats(&t, 1.0, &spec).unwrap();
        assert!((s.m - 1.3).abs() < 1e-15);
        assert!((s.m_tilde - 1.0).abs() < 1e-15);
        let t = grow_tree(&mut r, &spec, 0).unwrap();
        let s = weight_stats(&t, 1.0, &spec).unwrap();
        assert_eq!((s.m, s.m_tilde, s.beta_max), (1.0, 1.0, 1.0));
    }

    #[test]
    fn fractions_at_size_one_are_zero() {
        let mut r = rng::stream(4, 0);
        for f in subtree_fraction_sample(&mut r, 2, 1, 10).unwrap() {
            assert_eq!(f, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn batches_do_not_depend_on_worker_count() {
        let spec = KernelSpec::mixture("m", vec![(0.5, vec![0.2, 0.9]), (0.5, vec![0.7, 0.7])]);
        let a = tree_stats_batch(9, &spec, 1.0, 30, 64, 1).unwrap();
        let b = tree_stats_batch(9, &spec, 1.0, 30, 64, 3).unwrap();
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn tree_invariants(seed in any::<u64>(), size in 0usize..200, n in 2usize..5, gamma in 0.3f64..2.0) {
            let spec = KernelSpec::deterministic("p", (0..n).map(|j| 0.2 + 0.3 * j as f64).collect());
            let mut r = rng::stream(seed, 0);
            let t = grow_tree(&mut r, &spec, size).unwrap();
            prop_assert_eq!(t.leaf_count(), (n - 1) * size + 1);
            if size >= 1 {
                prop_assert_eq!(t.subtree_sizes.iter().sum::<usize>(), size - 1);
            }
            prop_assert!(t.leaf_weights.iter().all(|&b| b >= 0.0));
            let s = weight_stats(&t, gamma, &spec).unwrap();
            prop_assert!(s.beta_max.powf(gamma) <= s.m_tilde * (1.0 + 1e-12));
        }

        #[test]
        fn weight_norm_routes_agree(total in -0.99f64..5.0, n_children in 2usize..6, n in 0u64..10_000) {
            prop_assert!(weight_norm_from_total(total, n_children, n).is_ok());
        }
    }
}
