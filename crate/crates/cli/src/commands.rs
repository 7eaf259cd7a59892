//! One function per subcommand. Each writes its data files through
//! [`Outputs`] and returns whether the scenario's hypothesis checks held.

use std::io::Write;

use kactree::fixedpoint::{exact_second_moment, mixing_moment, solve_mixing};
use kactree::initial::classify;
use kactree::io::{write_batch, write_mixing, write_rate_fit, write_tree_records, write_wild_grid};
use kactree::kernel::{conjugate_exponent, spectral, spectral_gap_witness, validate_kernel};
use kactree::metrics::{empirical_cf, fit_decay_rate, ks_distance, ks_two_sample, wasserstein_distance};
use kactree::montecarlo::{sample_batch, sample_limit_batch, scaling_constant};
use kactree::rng;
use kactree::trees::{
    compositions, expected_weight_norm, shape_probability, subtree_fraction_sample, tree_stats_batch,
};
use kactree::wild::wild_grid;
use kactree::MixingLaw;
use serde::Serialize;

use crate::output::{time_tag, Outputs};
use crate::scenario::Scenario;
use crate::CliError;

/// Result of a command that ran to completion.
pub enum Verdict {
    Ok,
    Hypothesis(String),
}

/// Upper end of the search for a spectral-gap witness.
const WITNESS_S_MAX: f64 = 64.0;

fn need_times(s: &Scenario) -> Result<(), CliError> {
    if s.times.is_empty() {
        return Err(CliError::Config("this command needs a nonempty `times` list".into()));
    }
    Ok(())
}

fn csv_writer(path: &std::path::Path, header: &[&str]) -> Result<std::io::BufWriter<std::fs::File>, CliError> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "{}", header.join(","))?;
    Ok(w)
}

pub fn validate(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    let report = validate_kernel(&s.kernel)?;
    out.json("validation.json", &report)?;
    for c in &report.conditions {
        println!("{:<24} {:<5} {} (value {})", c.name, if c.passed { "ok" } else { "FAIL" }, c.requirement, c.value);
    }
    if report.passed() {
        Ok(Verdict::Ok)
    } else {
        let names: Vec<&str> = report.failures().map(|c| c.name).collect();
        Ok(Verdict::Hypothesis(format!("kernel fails {}", names.join(", "))))
    }
}

#[derive(Serialize)]
struct SpectralSummary {
    gamma: f64,
    total_at_gamma: f64,
    mu_at_gamma: f64,
    conjugate: kactree::kernel::ConjugateExponent,
    /// `(delta, mu(delta))` with `delta > gamma` and `mu(delta) < mu(gamma)`.
    self_similar_witness: Option<(f64, f64)>,
    /// Same with `delta < gamma`.
    degenerate_witness: Option<(f64, f64)>,
    scaling_constant: f64,
}

pub fn spectral_cmd(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    let g = &s.spectral;
    let mut w = csv_writer(&out.file("spectral.csv"), &["s", "S", "mu"])?;
    for i in 0..g.points {
        let x = g.s_min + (g.s_max - g.s_min) * i as f64 / (g.points - 1) as f64;
        let v = spectral(&s.kernel, x)?;
        writeln!(w, "{x},{},{}", v.total, v.mu.unwrap_or(f64::NAN))?;
    }
    w.flush()?;
    let at = spectral(&s.kernel, s.gamma)?;
    let summary = SpectralSummary {
        gamma: s.gamma,
        total_at_gamma: at.total,
        mu_at_gamma: at.mu.unwrap_or(f64::NAN),
        conjugate: conjugate_exponent(&s.kernel, s.gamma)?,
        self_similar_witness: spectral_gap_witness(&s.kernel, s.gamma, true, WITNESS_S_MAX),
        degenerate_witness: spectral_gap_witness(&s.kernel, s.gamma, false, WITNESS_S_MAX),
        scaling_constant: scaling_constant(&s.kernel, s.gamma)?,
    };
    println!(
        "S({}) = {}, mu = {}, q* = {} ({:?})",
        s.gamma, summary.total_at_gamma, summary.mu_at_gamma, summary.conjugate.value, summary.conjugate.diagnostic
    );
    out.json("spectral.json", &summary)?;
    Ok(Verdict::Ok)
}

pub fn simulate(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    need_times(s)?;
    for (i, &t) in s.times.iter().enumerate() {
        let batch =
            sample_batch(s.seed.wrapping_add(i as u64), &s.kernel, &s.initial, t, Some(s.gamma), s.count, s.workers)?;
        write_batch(&out.csv_with_sidecar(&format!("batch_t{}", time_tag(t))), &batch)?;
        println!("t = {t}: {} draws", batch.len());
    }
    Ok(Verdict::Ok)
}

fn solve(s: &Scenario, out: &mut Outputs) -> Result<MixingLaw, CliError> {
    let mut cfg = s.fixed_point;
    if cfg.workers == 0 {
        cfg.workers = s.workers;
    }
    let mixing = solve_mixing(s.seed, &s.kernel, s.gamma, &cfg)?;
    write_mixing(&out.csv_with_sidecar("mixing"), &mixing)?;
    println!(
        "mixing law: {} sweeps, converged {}, final W1 {:.3e}",
        mixing.sweeps_run, mixing.converged, mixing.final_distance
    );
    Ok(mixing)
}

#[derive(Serialize)]
struct SelfSimilarRow {
    t: f64,
    ks: f64,
    max_cf_gap: f64,
}

#[derive(Serialize)]
struct SelfSimilarSummary {
    witness: (f64, f64),
    mixing_converged: bool,
    mixing_second_moment: kactree::fixedpoint::MomentEstimate,
    exact_second_moment: Option<f64>,
    rows: Vec<SelfSimilarRow>,
}

pub fn selfsimilar(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    need_times(s)?;
    let Some(witness) = spectral_gap_witness(&s.kernel, s.gamma, true, WITNESS_S_MAX) else {
        return Ok(Verdict::Hypothesis(format!(
            "no delta > {} with mu(delta) < mu(gamma); the self-similar regime does not apply",
            s.gamma
        )));
    };
    let profile = classify(&s.initial, s.gamma)?;
    let mixing = solve(s, out)?;
    let q_star = conjugate_exponent(&s.kernel, s.gamma)?.value;
    let vinf = sample_limit_batch(s.seed ^ 0x5eed, &mixing, &profile, s.count, s.workers, &s.initial.label())?;
    write_batch(&out.csv_with_sidecar("vinf"), &vinf)?;
    let limit_cf = empirical_cf(&vinf.values, &s.wild.xi)?;
    let mut rows = Vec::new();
    let mut w = csv_writer(&out.file("selfsimilar.csv"), &["t", "ks", "max_cf_gap"])?;
    for (i, &t) in s.times.iter().enumerate() {
        let b = sample_batch(
            s.seed.wrapping_add(1 + i as u64),
            &s.kernel,
            &s.initial,
            t,
            Some(s.gamma),
            s.count,
            s.workers,
        )?;
        write_batch(&out.csv_with_sidecar(&format!("batch_t{}", time_tag(t))), &b)?;
        let ks = ks_two_sample(&b.values, &vinf.values)?;
        let cf = empirical_cf(&b.values, &s.wild.xi)?;
        let gap = cf.iter().zip(&limit_cf).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        writeln!(w, "{t},{ks},{gap}")?;
        println!("t = {t}: KS to V_inf {ks:.4}, max CF gap {gap:.4}");
        rows.push(SelfSimilarRow { t, ks, max_cf_gap: gap });
    }
    w.flush()?;
    out.json(
        "selfsimilar.json",
        &SelfSimilarSummary {
            witness,
            mixing_converged: mixing.converged,
            mixing_second_moment: mixing_moment(&mixing, 2.0, q_star)?,
            exact_second_moment: exact_second_moment(&s.kernel, s.gamma).ok(),
            rows,
        },
    )?;
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct DegenerateRow {
    t: f64,
    fraction_above: f64,
    median_abs: f64,
}

pub fn degenerate(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    need_times(s)?;
    let Some(witness) = spectral_gap_witness(&s.kernel, s.gamma, false, WITNESS_S_MAX) else {
        return Ok(Verdict::Hypothesis(format!(
            "no delta < {} with mu(delta) < mu(gamma); the degenerate regime does not apply",
            s.gamma
        )));
    };
    let threshold = s.degenerate.threshold;
    let mut rows = Vec::new();
    let mut w = csv_writer(&out.file("degenerate.csv"), &["t", "fraction_above", "median_abs"])?;
    for (i, &t) in s.times.iter().enumerate() {
        let b =
            sample_batch(s.seed.wrapping_add(i as u64), &s.kernel, &s.initial, t, Some(s.gamma), s.count, s.workers)?;
        write_batch(&out.csv_with_sidecar(&format!("batch_t{}", time_tag(t))), &b)?;
        let mut abs: Vec<f64> = b.values.iter().map(|v| v.abs()).collect();
        abs.sort_by(f64::total_cmp);
        let fraction_above = abs.iter().filter(|v| **v > threshold).count() as f64 / abs.len() as f64;
        let median_abs = abs[abs.len() / 2];
        writeln!(w, "{t},{fraction_above},{median_abs}")?;
        println!("t = {t}: fraction |V| > {threshold} = {fraction_above:.4}, median |V| = {median_abs:.4}");
        rows.push(DegenerateRow { t, fraction_above, median_abs });
    }
    w.flush()?;
    #[derive(Serialize)]
    struct Summary<'a> {
        witness: (f64, f64),
        threshold: f64,
        rows: &'a [DegenerateRow],
    }
    out.json("degenerate.json", &Summary { witness, threshold, rows: &rows })?;
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct WildRow {
    t: f64,
    xi: f64,
    gap: f64,
    allowed: f64,
}

pub fn wild_compare(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    need_times(s)?;
    let mut rows = Vec::new();
    let mut w = csv_writer(
        &out.file("wild_compare.csv"),
        &["t", "xi", "wild_re", "wild_im", "mc_re", "mc_im", "gap", "allowed"],
    )?;
    for (i, &t) in s.times.iter().enumerate() {
        let evals = wild_grid(&s.kernel, &s.initial, t, &s.wild.xi, s.wild.truncation)?;
        write_wild_grid(&out.file(&format!("wild_t{}.csv", time_tag(t))), &evals)?;
        let b = sample_batch(s.seed.wrapping_add(i as u64), &s.kernel, &s.initial, t, None, s.count, s.workers)?;
        let cf = empirical_cf(&b.values, &s.wild.xi)?;
        for (e, c) in evals.iter().zip(&cf) {
            let gap = (e.value - c).norm();
            let allowed = e.tail_bound + 5.0 / (s.count as f64).sqrt();
            writeln!(w, "{t},{},{},{},{},{},{gap},{allowed}", e.xi, e.value.re, e.value.im, c.re, c.im)?;
            println!("t = {t}, xi = {}: |gap| {gap:.4} (allowed {allowed:.4})", e.xi);
            rows.push(WildRow { t, xi: e.xi, gap, allowed });
        }
    }
    w.flush()?;
    let bad = rows.iter().filter(|r| r.gap > r.allowed).count();
    out.json("wild_compare.json", &rows)?;
    if bad > 0 {
        Ok(Verdict::Hypothesis(format!("{bad} grid points exceed tail bound + 5/sqrt(n)")))
    } else {
        Ok(Verdict::Ok)
    }
}

pub fn rate(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    need_times(s)?;
    let delta = s.delta.ok_or_else(|| CliError::Config("`rate` needs `delta`".into()))?;
    let profile = classify(&s.initial, s.gamma)?;
    let mixing = solve(s, out)?;
    let label = s.initial.label();
    let vinf = sample_limit_batch(s.seed ^ 0x5eed, &mixing, &profile, s.count, s.workers, &label)?;
    let vinf2 = sample_limit_batch(s.seed ^ 0x5eed ^ 1, &mixing, &profile, s.count, s.workers, &label)?;
    write_batch(&out.csv_with_sidecar("vinf"), &vinf)?;
    let floor = 3.0 * wasserstein_distance(&vinf.values, &vinf2.values, delta)?.cost;
    let mut points = Vec::new();
    for (i, &t) in s.times.iter().enumerate() {
        let b = sample_batch(
            s.seed.wrapping_add(1 + i as u64),
            &s.kernel,
            &s.initial,
            t,
            Some(s.gamma),
            s.count,
            s.workers,
        )?;
        let d = wasserstein_distance(&b.values, &vinf.values, delta)?;
        println!("t = {t}: transport cost {:.4e}", d.cost);
        points.push((t, d.cost));
    }
    let fit = fit_decay_rate(&points, &s.kernel, s.gamma, delta, floor)?;
    let (json, csv) = (out.file("rate.json"), out.file("rate.csv"));
    write_rate_fit(&json, &csv, &fit)?;
    println!(
        "fitted slope {:.4} (bound exponent {:.4}), R^2 {:.4}, floor {:.3e}",
        fit.slope, fit.predicted_slope, fit.r_squared, fit.floor
    );
    Ok(Verdict::Ok)
}

#[derive(Serialize)]
struct NormRow {
    size: usize,
    m_n: f64,
    mean_m: f64,
    mean_m_tilde: f64,
    se_m_tilde: f64,
}

#[derive(Serialize)]
struct TreeSummary {
    weight_norms: Vec<NormRow>,
    max_shape_z: f64,
    dirichlet_size: usize,
    dirichlet_ks: f64,
}

pub fn tree_stats(s: &Scenario, out: &mut Outputs) -> Result<Verdict, CliError> {
    let n = s.kernel.n_children;
    let t = &s.tree;
    let mut weight_norms = Vec::new();
    for (i, &size) in t.sizes.iter().enumerate() {
        let recs = tree_stats_batch(s.seed.wrapping_add(i as u64), &s.kernel, s.gamma, size, t.count, s.workers)?;
        write_tree_records(&out.file(&format!("trees_n{size}.csv")), &recs, n)?;
        let count = recs.len() as f64;
        let mean_m = recs.iter().map(|r| r.stats.m).sum::<f64>() / count;
        let mean = recs.iter().map(|r| r.stats.m_tilde).sum::<f64>() / count;
        let var = recs.iter().map(|r| (r.stats.m_tilde - mean).powi(2)).sum::<f64>() / (count - 1.0).max(1.0);
        let m_n = expected_weight_norm(&s.kernel, s.gamma, size as u64)?.value();
        println!("n = {size}: m_n = {m_n:.6}, mean M = {mean_m:.6}, mean M_tilde = {mean:.6}");
        weight_norms.push(NormRow { size, m_n, mean_m, mean_m_tilde: mean, se_m_tilde: (var / count).sqrt() });
    }

    // Shape law against its frequencies in grown trees.
    let flat = kactree::KernelSpec::deterministic("flat", vec![1.0; n]);
    let mut max_z = 0.0f64;
    let mut w = csv_writer(&out.file("shapes.csv"), &["k", "profile", "probability", "exact", "frequency"])?;
    for k in 1..=t.max_shape_size {
        let seed = s.seed.wrapping_add(1000 + k as u64);
        let recs = tree_stats_batch(seed, &flat, 1.0, k, t.count, s.workers)?;
        for sizes in compositions(k - 1, n) {
            let p = shape_probability(n, &sizes)?;
            let freq = recs.iter().filter(|r| r.subtree_sizes == sizes).count() as f64 / t.count as f64;
            let se = (p.value * (1.0 - p.value) / t.count as f64).sqrt();
            if se > 0.0 {
                max_z = max_z.max((freq - p.value).abs() / se);
            }
            let profile: Vec<String> = sizes.iter().map(|i| i.to_string()).collect();
            let exact = p.exact.as_ref().map_or(String::new(), |r| r.to_string());
            writeln!(w, "{k},{},{},{exact},{freq}", profile.join("|"), p.value)?;
        }
    }
    w.flush()?;

    let mut r = rng::stream(s.seed, u64::MAX);
    let fractions = subtree_fraction_sample(&mut r, n, t.dirichlet_size, t.count)?;
    let first: Vec<f64> = fractions.iter().map(|f| f[0]).collect();
    let expo = 1.0 / (n - 1) as f64;
    let dirichlet_ks = ks_distance(&first, |x| x.clamp(0.0, 1.0).powf(expo))?;
    println!("shape law: max deviation {max_z:.2} SE; subtree fraction KS {dirichlet_ks:.4}");
    out.json(
        "tree_stats.json",
        &TreeSummary { weight_norms, max_shape_z: max_z, dirichlet_size: t.dirichlet_size, dirichlet_ks },
    )?;
    Ok(Verdict::Ok)
}
