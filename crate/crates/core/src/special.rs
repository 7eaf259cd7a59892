//! Small numerical helpers shared by the modules.

pub use statrs::function::gamma::{gamma, ln_gamma};

/// `x^s` with the convention `0^0 = 0`.
#[inline]
pub fn pow0(x: f64, s: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x.powf(s)
    }
}

/// `ln Γ(x) - ln Γ(y)` for `x, y > 0` without cancellation between two
/// large log-gamma values.
///
/// Both arguments are shifted upwards until they clear the Stirling
/// threshold; the difference of the two Stirling expansions is then
/// written in terms of `ln_1p((x - y) / y)`.
pub fn ln_gamma_ratio(mut x: f64, mut y: f64) -> f64 {
    debug_assert!(x > 0.0 && y > 0.0);
    if x == y {
        return 0.0;
    }
    const THRESHOLD: f64 = 12.0;
    let mut acc = 0.0;
    while x.min(y) < THRESHOLD {
        // ln Γ(x) = ln Γ(x + 1) - ln x
        acc += y.ln() - x.ln();
        x += 1.0;
        y += 1.0;
    }
    let d = x - y;
    let main = (x - 0.5) * (d / y).ln_1p() + d * y.ln() - d;
    acc + main + stirling_tail(x) - stirling_tail(y)
}

fn stirling_tail(z: f64) -> f64 {
    let z2 = z * z;
    let inv = 1.0 / z;
    let inv2 = 1.0 / z2;
    inv * (1.0 / 12.0 - inv2 * (1.0 / 360.0 - inv2 * (1.0 / 1260.0 - inv2 * (1.0 / 1680.0 - inv2 / 1188.0))))
}

/// Rising factorial `(r)_n = Γ(r + n) / Γ(r)` as a running product.
pub fn pochhammer(r: f64, n: u64) -> f64 {
    (0..n).fold(1.0, |acc, i| acc * (r + i as f64))
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Integrates `f` over `[a, b]` with an `n`-point Gauss–Legendre rule.
pub fn integrate_gl(f: impl Fn(f64) -> f64, a: f64, b: f64, rule: &(Vec<f64>, Vec<f64>)) -> f64 {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (b + a);
    rule.0.iter().zip(&rule.1).map(|(x, w)| w * f(mid + half * x)).sum::<f64>() * half
}
