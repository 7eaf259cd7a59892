//! CSV and JSON persistence.
//!
//! Batches and mixing populations are stored as a one-column CSV plus a JSON
//! sidecar (same stem, `.json` extension) holding the metadata. Floats are
//! written in shortest round-trip form, so reloading is lossless and reruns
//! produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fixedpoint::{MixingLaw, UpdateForm};
use crate::metrics::RateFit;
use crate::montecarlo::{SampleBatch, TimeMark};
use crate::trees::TreeRecord;
use crate::wild::WildEvaluation;

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(File::open(path)?))?)
}

fn write_column(path: &Path, header: &str, values: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record([header])?;
    for v in values {
        w.write_record([v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

fn read_column(path: &Path) -> Result<Vec<f64>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            rec.get(0)
                .and_then(|s| s.trim().parse::<f64>().ok())
                .ok_or_else(|| Error::invalid(format!("{}: unparsable row {rec:?}", path.display())))
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct BatchMeta {
    count: usize,
    t: TimeMark,
    rescale_gamma: Option<f64>,
    seed: u64,
    kernel_label: String,
    law_label: String,
}

pub fn write_batch(path: &Path, batch: &SampleBatch) -> Result<()> {
    write_column(path, "value", &batch.values)?;
    write_json(
        &sidecar_path(path),
        &BatchMeta {
            count: batch.values.len(),
            t: batch.t,
            rescale_gamma: batch.rescale_gamma,
            seed: batch.seed,
            kernel_label: batch.kernel_label.clone(),
            law_label: batch.law_label.clone(),
        },
    )
}

pub fn read_batch(path: &Path) -> Result<SampleBatch> {
    let values = read_column(path)?;
    let meta: BatchMeta = read_json(&sidecar_path(path))?;
    if meta.count != values.len() {
        return Err(Error::invalid(format!(
            "{}: sidecar announces {} values, file has {}",
            path.display(),
            meta.count,
            values.len()
        )));
    }
    Ok(SampleBatch {
        values,
        t: meta.t,
        rescale_gamma: meta.rescale_gamma,
        seed: meta.seed,
        kernel_label: meta.kernel_label,
        law_label: meta.law_label,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct MixingMeta {
    pop_size: usize,
    gamma: f64,
    kernel_label: String,
    form: UpdateForm,
    sweeps_run: usize,
    converged: bool,
    final_distance: f64,
}

pub fn write_mixing(path: &Path, mixing: &MixingLaw) -> Result<()> {
    write_column(path, "y", &mixing.population)?;
    write_json(
        &sidecar_path(path),
        &MixingMeta {
            pop_size: mixing.population.len(),
            gamma: mixing.gamma,
            kernel_label: mixing.kernel_label.clone(),
            form: mixing.form,
            sweeps_run: mixing.sweeps_run,
            converged: mixing.converged,
            final_distance: mixing.final_distance,
        },
    )
}

pub fn read_mixing(path: &Path) -> Result<MixingLaw> {
    let population = read_column(path)?;
    let meta: MixingMeta = read_json(&sidecar_path(path))?;
    if meta.pop_size != population.len() {
        return Err(Error::invalid(format!("{}: population size mismatch", path.display())));
    }
    Ok(MixingLaw {
        population,
        gamma: meta.gamma,
        kernel_label: meta.kernel_label,
        form: meta.form,
        sweeps_run: meta.sweeps_run,
        converged: meta.converged,
        final_distance: meta.final_distance,
    })
}

/// Columns `size, M, M_tilde, beta_max, i_1, ..., i_N`.
pub fn write_tree_records(path: &Path, records: &[TreeRecord], n_children: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["size".to_string(), "M".into(), "M_tilde".into(), "beta_max".into()];
    header.extend((1..=n_children).map(|j| format!("i_{j}")));
    w.write_record(&header)?;
    for r in records {
        let mut row =
            vec![r.size.to_string(), r.stats.m.to_string(), r.stats.m_tilde.to_string(), r.stats.beta_max.to_string()];
        row.extend(r.subtree_sizes.iter().map(|i| i.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `xi, re, im, tail_bound`.
pub fn write_wild_grid(path: &Path, evaluations: &[WildEvaluation]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["xi", "re", "im", "tail_bound"])?;
    for e in evaluations {
        w.write_record([e.xi.to_string(), e.value.re.to_string(), e.value.im.to_string(), e.tail_bound.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// JSON summary plus a plot-ready CSV with columns `t, distance, used, fitted`.
pub fn write_rate_fit(json_path: &Path, csv_path: &Path, fit: &RateFit) -> Result<()> {
    write_json(json_path, fit)?;
    let mut w = csv::Writer::from_path(csv_path)?;
    w.write_record(["t", "distance", "used", "fitted"])?;
    for (&(t, d), &used) in fit.points.iter().zip(&fit.used) {
        let fitted = (fit.intercept - fit.slope * t).exp();
        w.write_record([t.to_string(), d.to_string(), used.to_string(), fitted.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::fit_decay_rate;
    use crate::KernelSpec;

    #[test]
    fn batch_round_trip_is_lossless() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("b.csv");
        let batch = SampleBatch {
            values: vec![0.1, -1.0 / 3.0, 1e-300, 123456.789, std::f64::consts::PI],
            t: TimeMark::Infinity,
            rescale_gamma: Some(1.0),
            seed: 42,
            kernel_label: "k".into(),
            law_label: "rademacher".into(),
        };
        write_batch(&path, &batch).unwrap();
        assert_eq!(read_batch(&path).unwrap(), batch);
        let first = std::fs::read(&path).unwrap();
        write_batch(&path, &batch).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), first);
    }

    #[test]
    fn mixing_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        let mut m = MixingLaw::degenerate(3, 2.0, "kac2");
        m.population = vec![0.5, 1.25, 1.25];
        write_mixing(&path, &m).unwrap();
        assert_eq!(read_mixing(&path).unwrap(), m);
    }

    #[test]
    fn rate_fit_files() {
        let dir = tempfile::tempdir().unwrap();
        let spec = KernelSpec::deterministic("d", vec![0.6, 0.7]);
        let pts: Vec<(f64, f64)> = (1..=4).map(|i| (i as f64, (-0.8 * i as f64).exp())).collect();
        let fit = fit_decay_rate(&pts, &spec, 1.0, 2.0, 0.0).unwrap();
        write_rate_fit(&dir.path().join("r.json"), &dir.path().join("r.csv"), &fit).unwrap();
        let back: RateFit = read_json(&dir.path().join("r.json")).unwrap();
        assert_eq!(back, fit);
        let text = std::fs::read_to_string(dir.path().join("r.csv")).unwrap();
        assert_eq!(text.lines().count(), 5);
    }
}
