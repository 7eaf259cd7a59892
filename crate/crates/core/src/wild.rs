//! Truncated Wild-series evaluation of `phi(t, xi)` for finitely supported kernels.
//!
//! `phi(t, xi) = sum_k zeta(t, k) q_k(xi)` where `zeta(t, .)` is the law of the
//! clock and `q_k` averages the tree-shape recursion
//! `q_k(xi) = sum_i p_k(i) E[prod_j q_{i_j}(A_j xi)]`, `q_0 = phi_0`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::initial::InitialLaw;
use crate::kernel::KernelSpec;
use crate::trees::{compositions, shape_probability};

pub const DEFAULT_TRUNCATION: usize = 12;

/// Default cap on the number of recursive `q` evaluations per point.
pub const DEFAULT_COST_CAP: f64 = 5e7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WildEvaluation {
    pub xi: f64,
    pub t: f64,
    pub truncation: usize,
    pub value: Complex64,
    /// `1 - sum_{k <= K} zeta(t, k)`, which bounds the neglected terms.
    pub tail_bound: f64,
}

/// Shape tables and atoms for direct evaluation of the `q_k` recursion.
#[derive(Clone, Debug)]
pub struct WildSeries {
    law: InitialLaw,
    atoms: Vec<(f64, Vec<f64>)>,
    /// `shapes[k]` lists `(p_k(i), i)` for `i` in `I_k`.
    shapes: Vec<Vec<(f64, Vec<usize>)>>,
    /// Number of recursive calls needed for `q_k` at a nonzero argument.
    cost: Vec<f64>,
}

impl WildSeries {
    pub fn new(spec: &KernelSpec, law: &InitialLaw, max_k: usize) -> Result<Self> {
        Self::with_cost_cap(spec, law, max_k, DEFAULT_COST_CAP)
    }

    pub fn with_cost_cap(spec: &KernelSpec, law: &InitialLaw, max_k: usize, cost_cap: f64) -> Result<Self> {
        spec.check()?;
        law.check()?;
        let atoms: Vec<(f64, Vec<f64>)> = spec
            .atoms()
            .ok_or_else(|| Error::Unsupported("the Wild series needs a kernel with finitely many atoms".into()))?
            .into_iter()
            .filter(|(p, _)| *p > 0.0)
            .map(|(p, w)| (p, w.to_vec()))
            .collect();
        if !law.has_analytic_cf() {
            return Err(Error::Unsupported(format!("no closed-form characteristic function for {}", law.label())));
        }
        let n = spec.n_children;
        let mut shapes = vec![Vec::new()];
        let mut cost = vec![1.0];
        for k in 1..=max_k {
            let mut list = Vec::new();
            let mut c = 1.0;
            for sizes in compositions(k - 1, n) {
                let p = shape_probability(n, &sizes)?.value;
                c += atoms.len() as f64 * sizes.iter().map(|&i| cost[i]).sum::<f64>();
                list.push((p, sizes));
            }
            shapes.push(list);
            cost.push(c);
        }
        if cost[max_k] > cost_cap {
            return Err(Error::Budget(format!(
                "q_{max_k} needs about {:.3e} recursive evaluations per point, above the cap {cost_cap:.3e}",
                cost[max_k]
            )));
        }
        Ok(WildSeries { law: law.clone(), atoms, shapes, cost })
    }

    pub fn max_k(&self) -> usize {
        self.shapes.len() - 1
    }

    /// Estimated evaluations for `q_k`.
    pub fn cost(&self, k: usize) -> f64 {
        self.cost[k]
    }

    pub fn q(&self, k: usize, xi: f64) -> Complex64 {
        if xi == 0.0 {
            return Complex64::new(1.0, 0.0);
        }
        if k == 0 {
            return self.law.analytic_cf(xi).expect("checked in constructor");
        }
        let mut total = Complex64::new(0.0, 0.0);
        for (p, sizes) in &self.shapes[k] {
            for (w, a) in &self.atoms {
                let prod =
                    sizes.iter().zip(a).fold(Complex64::new(1.0, 0.0), |acc, (&i, &aj)| acc * self.q(i, aj * xi));
                total += prod * (p * w);
            }
        }
        total
    }
}

pub fn wild_q(spec: &KernelSpec, law: &InitialLaw, k: usize, xi: f64) -> Result<Complex64> {
    Ok(WildSeries::new(spec, law, k)?.q(k, xi))
}

/// `zeta(t, k)` for `k = 0..=max_k`.
pub fn clock_weights(t: f64, n_children: usize, max_k: usize) -> Vec<f64> {
    let nm1 = (n_children - 1) as f64;
    let r = 1.0 / nm1;
    let x = -(-nm1 * t).exp_m1();
    let mut out = Vec::with_capacity(max_k + 1);
    let mut term = (-t).exp();
    for k in 0..=max_k {
        out.push(term);
        term *= (r + k as f64) / (k as f64 + 1.0) * x;
    }
    out
}

fn evaluate(series: &WildSeries, weights: &[f64], t: f64, xi: f64) -> WildEvaluation {
    let value = weights.iter().enumerate().map(|(k, &z)| series.q(k, xi) * z).sum::<Complex64>();
    let mass: f64 = weights.iter().sum();
    WildEvaluation { xi, t, truncation: series.max_k(), value, tail_bound: (1.0 - mass).clamp(0.0, 1.0) }
}

pub fn wild_solution(
    spec: &KernelSpec,
    law: &InitialLaw,
    t: f64,
    xi: f64,
    truncation: usize,
) -> Result<WildEvaluation> {
    Ok(wild_grid(spec, law, t, &[xi], truncation)?.remove(0))
}

/// Evaluates the truncated series at every grid point, in parallel.
pub fn wild_grid(
    spec: &KernelSpec,
    law: &InitialLaw,
    t: f64,
    xi_grid: &[f64],
    truncation: usize,
) -> Result<Vec<WildEvaluation>> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::domain(format!("time must be finite and >= 0, got {t}")));
    }
    let series = WildSeries::new(spec, law, truncation)?;
    let weights = clock_weights(t, spec.n_children, truncation);
    Ok(xi_grid.par_iter().map(|&xi| evaluate(&series, &weights, t, xi)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Marginal;
    use proptest::prelude::*;

    #[test]
    fn q_examples() {
        let law = InitialLaw::Gaussian { sigma: 0.7 };
        let k = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        assert_eq!(wild_q(&k, &law, 0, 1.3).unwrap(), law.analytic_cf(1.3).unwrap());

        let half = KernelSpec::deterministic("half", vec![0.5, 0.5]);
        let pm = InitialLaw::PointMass { m0: 1.0 };
        for kk in 0..6 {
            let q = wild_q(&half, &pm, kk, 0.9).unwrap();
            assert!((q - Complex64::from_polar(1.0, 0.9)).norm() < 1e-14);
        }

        let ones = KernelSpec::deterministic("ones", vec![1.0, 1.0]);
        let q = wild_q(&ones, &InitialLaw::Rademacher, 1, 0.8).unwrap();
        assert!((q.re - 0.8f64.cos().powi(2)).abs() < 1e-15 && q.im == 0.0);
    }

    #[test]
    fn unsupported_inputs() {
        let pareto = InitialLaw::SymmetricPareto { gamma: 1.0, c0: 0.5 };
        let k = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        assert!(matches!(wild_q(&k, &pareto, 1, 1.0), Err(Error::Unsupported(_))));
        let cont = KernelSpec::independent("u", vec![Marginal::Uniform01Power { power: 1.0 }; 2]);
        assert!(matches!(wild_q(&cont, &InitialLaw::Rademacher, 1, 1.0), Err(Error::Unsupported(_))));
    }

    #[test]
    fn cost_guard_trips_for_many_atoms() {
        let four = KernelSpec::mixture(
            "four",
            vec![(0.25, vec![0.6, 0.7]), (0.25, vec![0.2, 0.9]), (0.25, vec![0.5, 0.5]), (0.25, vec![1.0, 0.3])],
        );
        assert!(matches!(wild_q(&four, &InitialLaw::Rademacher, 12, 1.0), Err(Error::Budget(_))));
        assert!(wild_q(&four, &InitialLaw::Rademacher, 7, 1.0).is_ok());
    }

    #[test]
    fn solution_examples() {
        let k = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let law = InitialLaw::Rademacher;
        let w = wild_solution(&k, &law, 0.0, 1.1, 12).unwrap();
        assert!((w.value.re - 1.1f64.cos()).abs() < 1e-15);
        assert_eq!(w.tail_bound, 0.0);
        let w = wild_solution(&k, &law, 1.5, 0.0, 8).unwrap();
        assert!((w.value.re + w.tail_bound - 1.0).abs() < 1e-14);
    }

    #[test]
    fn tail_bound_decreases_with_truncation() {
        let k = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let mut last = 1.0;
        for kk in 0..10 {
            let w = wild_solution(&k, &InitialLaw::Rademacher, 1.0, 1.0, kk).unwrap();
            assert!(w.tail_bound < last);
            last = w.tail_bound;
        }
    }

    #[test]
    fn conservative_point_mass_stays_close_to_phase() {
        let half = KernelSpec::mixture("h", vec![(0.5, vec![0.5, 0.5]), (0.5, vec![0.25, 0.75])]);
        let pm = InitialLaw::PointMass { m0: 1.0 };
        for xi in [0.3, 1.0, 2.5] {
            let w = wild_solution(&half, &pm, 1.0, xi, 8).unwrap();
            assert!((w.value - Complex64::from_polar(1.0, xi)).norm() <= w.tail_bound + 1e-12);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn q_is_a_characteristic_function(a in 0.0f64..1.5, b in 0.0f64..1.5, k in 0usize..7, xi in -5.0f64..5.0) {
            let spec = KernelSpec::mixture("p", vec![(0.3, vec![a, b]), (0.7, vec![b, 0.5])]);
            let series = WildSeries::new(&spec, &InitialLaw::Gaussian { sigma: 1.0 }, k).unwrap();
            let q = series.q(k, xi);
            prop_assert!(q.norm() <= 1.0 + 1e-12);
            prop_assert_eq!(series.q(k, 0.0), Complex64::new(1.0, 0.0));
            let shifted = WildSeries::new(&spec, &InitialLaw::PointMass { m0: 0.7 }, k).unwrap();
            prop_assert!((shifted.q(k, -xi) - shifted.q(k, xi).conj()).norm() < 1e-12);
        }
    }
}
