//! Distances between samples and reference laws, and decay-rate fitting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernel::{mu, KernelSpec};
use crate::special::gamma as gamma_fn;

/// `(1/n) sum exp(i xi x)` at every grid point.
pub fn empirical_cf(values: &[f64], xi_grid: &[f64]) -> Result<Vec<Complex64>> {
    if values.is_empty() {
        return Err(Error::domain("empirical characteristic function of an empty sample"));
    }
    let n = values.len() as f64;
    Ok(xi_grid
        .iter()
        .map(|&xi| {
            let (c, s) = values.iter().fold((0.0, 0.0), |(c, s), &x| {
                let (sin, cos) = (xi * x).sin_cos();
                (c + cos, s + sin)
            });
            Complex64::new(c / n, s / n)
        })
        .collect())
}

fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(f64::total_cmp);
    v
}

/// `sup_x |F_n(x) - F(x)|` for the empirical distribution function of
/// `values`. Ties and atoms of the reference are handled exactly, using the
/// left limit `F(x-)` approximated by `F` at the preceding float.
pub fn ks_distance(values: &[f64], reference_cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    let xs = sorted(values);
    let n = xs.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let below = i as f64 / n;
        let at = j as f64 / n;
        d = d.max((at - reference_cdf(x)).abs()).max((below - reference_cdf(x.next_down())).abs());
        i = j;
    }
    Ok(d.min(1.0))
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("KS distance of an empty sample"));
    }
    let (xa, xb) = (sorted(a), sorted(b));
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let x = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] == x {
            i += 1;
        }
        while j < xb.len() && xb[j] == x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WassersteinEstimate {
    /// `cost^{1/max(delta, 1)}`.
    pub value: f64,
    /// `(1/n) sum |x_(i) - y_(i)|^delta` under the sorted coupling.
    pub cost: f64,
    /// Set for `delta < 1`, where the sorted coupling need not be optimal.
    pub upper_bound_only: bool,
}

/// Sorted-coupling Wasserstein distance of order `delta`.
///
/// Samples of unequal size are compared by pairing each order statistic of
/// the smaller one with the linearly interpolated quantile of the larger one.
pub fn wasserstein_distance(a: &[f64], b: &[f64], delta: f64) -> Result<WassersteinEstimate> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::domain("Wasserstein distance of an empty sample"));
    }
    if !(delta > 0.0) {
        return Err(Error::domain(format!("Wasserstein order must be positive, got {delta}")));
    }
    let (small, large) = if a.len() <= b.len() { (sorted(a), sorted(b)) } else { (sorted(b), sorted(a)) };
    let n = small.len();
    let m = large.len();
    let cost_of = |x: f64, y: f64| {
        let d = (x - y).abs();
        if delta == 1.0 {
            d
        } else if delta == 2.0 {
            d * d
        } else {
            d.powf(delta)
        }
    };
    let total: f64 = if n == m {
        small.iter().zip(&large).map(|(&x, &y)| cost_of(x, y)).sum()
    } else {
        small
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let pos = ((i as f64 + 0.5) / n as f64 * m as f64 - 0.5).clamp(0.0, (m - 1) as f64);
                let lo = pos.floor() as usize;
                let hi = (lo + 1).min(m - 1);
                let w = pos - lo as f64;
                cost_of(x, large[lo] * (1.0 - w) + large[hi] * w)
            })
            .sum()
    };
    let cost = total / n as f64;
    Ok(WassersteinEstimate { value: cost.powf(1.0 / delta.max(1.0)), cost, upper_bound_only: delta < 1.0 })
}

/// Least-squares fit of `ln d = c - slope * t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentialFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn fit_exponential_decay(points: &[(f64, f64)]) -> Result<ExponentialFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!("need at least 3 points, got {}", points.len())));
    }
    if let Some(p) = points.iter().find(|p| !(p.1 > 0.0) || !p.0.is_finite()) {
        return Err(Error::domain(format!("cannot fit a log-linear model through {p:?}")));
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut stt, mut sty, mut syy) = (0.0, 0.0, 0.0);
    for &(t, d) in points {
        let (dt, dy) = (t - mt, d.ln() - my);
        stt += dt * dt;
        sty += dt * dy;
        syy += dy * dy;
    }
    if stt == 0.0 {
        return Err(Error::InsufficientData("all points share the same time".into()));
    }
    let b = sty / stt;
    let r_squared = if syy == 0.0 { 1.0 } else { (b * b * stt / syy).min(1.0) };
    Ok(ExponentialFit { slope: -b, intercept: my - b * mt, r_squared })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    /// `(t, distance)` as supplied, where distance is the transport cost
    /// `W_delta^{max(delta, 1)}`.
    pub points: Vec<(f64, f64)>,
    /// Points that cleared the resolution floor and entered the fit.
    pub used: Vec<bool>,
    pub floor: f64,
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `delta * (mu(gamma) - mu(delta))`.
    pub predicted_slope: f64,
}

/// Fits the exponential decay rate of the distances above `floor` and
/// attaches the rate of the upper bound for comparison.
pub fn fit_decay_rate(points: &[(f64, f64)], spec: &KernelSpec, gamma: f64, delta: f64, floor: f64) -> Result<RateFit> {
    let predicted_slope = delta * (mu(spec, gamma)? - mu(spec, delta)?);
    let used: Vec<bool> = points.iter().map(|p| p.1 > floor).collect();
    let kept: Vec<(f64, f64)> = points.iter().zip(&used).filter(|(_, u)| **u).map(|(p, _)| *p).collect();
    if kept.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "only {} of {} points lie above the resolution floor {floor:e}",
            kept.len(),
            points.len()
        )));
    }
    let fit = fit_exponential_decay(&kept)?;
    Ok(RateFit {
        points: points.to_vec(),
        used,
        floor,
        slope: fit.slope,
        intercept: fit.intercept,
        r_squared: fit.r_squared,
        predicted_slope,
    })
}

/// `(E|X_0|^delta + E|V_inf|^delta) / Gamma(1 + delta)` from samples.
pub fn zolotarev_bound_constant(x0: &[f64], vinf: &[f64], delta: f64) -> Result<f64> {
    if x0.is_empty() || vinf.is_empty() {
        return Err(Error::domain("bound constant needs two nonempty samples"));
    }
    if !(delta > 0.0 && delta <= 3.0) {
        return Err(Error::domain(format!("bound constant needs 0 < delta <= 3, got {delta}")));
    }
    let moment = |v: &[f64]| v.iter().map(|x| x.abs().powf(delta)).sum::<f64>() / v.len() as f64;
    Ok((moment(x0) + moment(vinf)) / gamma_fn(1.0 + delta))
}
