use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sampling::drop_scene;
use super::spec::{ExperimentKind, ExperimentSpec, SweepPoint};
use crate::config::SystemConfig;
use crate::design::{Link, Method};
use crate::error::{Error, Result};
use crate::metrics::{to_bits, IsacWeights};
use crate::oracle::{run_validation, write_validation_csv, ValidationPlan, ValidationRecord};

pub const RECORDS_FILE: &str = "records.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const VALIDATION_FILE: &str = "validation.csv";

pub const RECORD_COLUMNS: [&str; 23] = [
    "experiment",
    "method",
    "link",
    "point",
    "side_length",
    "n_tx",
    "n_rx",
    "weight",
    "drop",
    "user_x",
    "user_y",
    "target_x",
    "target_y",
    "target_z",
    "se_nats",
    "smi_nats",
    "weighted_nats",
    "se_bits",
    "smi_bits",
    "weighted_bits",
    "sensing_power_w",
    "bcd_iterations",
    "wall_time_us",
];

pub const SUMMARY_COLUMNS: [&str; 20] = [
    "experiment",
    "method",
    "link",
    "point",
    "side_length",
    "n_tx",
    "n_rx",
    "weight",
    "drops",
    "se_mean",
    "se_ci95",
    "smi_mean",
    "smi_ci95",
    "weighted_mean",
    "weighted_ci95",
    "se_bits_mean",
    "smi_bits_mean",
    "weighted_bits_mean",
    "sensing_power_mean_w",
    "bcd_iterations_mean",
];

/// One design evaluated on one drop. Rates are in nats unless the column
/// says bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub experiment: String,
    pub method: Method,
    pub link: Link,
    pub point: usize,
    pub side_length: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub weight: f64,
    pub drop: usize,
    pub user_x: f64,
    pub user_y: f64,
    pub target_x: f64,
    pub target_y: f64,
    pub target_z: f64,
    pub se_nats: f64,
    pub smi_nats: f64,
    pub weighted_nats: f64,
    pub se_bits: f64,
    pub smi_bits: f64,
    pub weighted_bits: f64,
    pub sensing_power_w: Option<f64>,
    pub bcd_iterations: Option<usize>,
    pub wall_time_us: u64,
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

impl SweepRecord {
    fn row(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.method.to_string(),
            self.link.to_string(),
            self.point.to_string(),
            float(self.side_length),
            self.n_tx.to_string(),
            self.n_rx.to_string(),
            float(self.weight),
            self.drop.to_string(),
            float(self.user_x),
            float(self.user_y),
            float(self.target_x),
            float(self.target_y),
            float(self.target_z),
            float(self.se_nats),
            float(self.smi_nats),
            float(self.weighted_nats),
            float(self.se_bits),
            float(self.smi_bits),
            float(self.weighted_bits),
            self.sensing_power_w.map(float).unwrap_or_default(),
            self.bcd_iterations.map(|i| i.to_string()).unwrap_or_default(),
            self.wall_time_us.to_string(),
        ]
    }

    fn belongs_to(&self, spec: &ExperimentSpec, point: &SweepPoint) -> bool {
        self.experiment == spec.kind.as_str()
            && self.link == spec.link
            && self.side_length == point.side_length
            && self.n_tx == point.n_tx
            && self.n_rx == point.n_rx
            && self.weight == point.weight
    }
}

/// Per-point, per-method means with 95% normal-approximation half-widths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub experiment: String,
    pub method: Method,
    pub link: Link,
    pub point: usize,
    pub side_length: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub weight: f64,
    pub drops: usize,
    pub se_mean: f64,
    pub se_ci95: f64,
    pub smi_mean: f64,
    pub smi_ci95: f64,
    pub weighted_mean: f64,
    pub weighted_ci95: f64,
    pub se_bits_mean: f64,
    pub smi_bits_mean: f64,
    pub weighted_bits_mean: f64,
    pub sensing_power_mean_w: Option<f64>,
    pub bcd_iterations_mean: Option<f64>,
}

impl SummaryRow {
    fn row(&self) -> Vec<String> {
        vec![
            self.experiment.clone(),
            self.method.to_string(),
            self.link.to_string(),
            self.point.to_string(),
            float(self.side_length),
            self.n_tx.to_string(),
            self.n_rx.to_string(),
            float(self.weight),
            self.drops.to_string(),
            float(self.se_mean),
            float(self.se_ci95),
            float(self.smi_mean),
            float(self.smi_ci95),
            float(self.weighted_mean),
            float(self.weighted_ci95),
            float(self.se_bits_mean),
            float(self.smi_bits_mean),
            float(self.weighted_bits_mean),
            self.sensing_power_mean_w.map(float).unwrap_or_default(),
            self.bcd_iterations_mean.map(float).unwrap_or_default(),
        ]
    }
}

/// `(mean, 1.96 s / √n)`.
pub fn mean_ci95(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, 1.96 * (var / n as f64).sqrt())
}

/// `true` when `b` beats `a` on both SE and SMI by more than the combined
/// confidence half-widths, and strictly on at least one.
pub fn dominates_beyond_confidence(b: &SummaryRow, a: &SummaryRow) -> bool {
    let se_gap = a.se_ci95 + b.se_ci95;
    let smi_gap = a.smi_ci95 + b.smi_ci95;
    let se_ok = b.se_mean >= a.se_mean + se_gap;
    let smi_ok = b.smi_mean >= a.smi_mean + smi_gap;
    let strict = b.se_mean > a.se_mean + se_gap || b.smi_mean > a.smi_mean + smi_gap;
    se_ok && smi_ok && strict
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub records: Vec<SweepRecord>,
    pub summary: Vec<SummaryRow>,
    pub validation: Vec<ValidationRecord>,
    /// Records taken over from an earlier, interrupted run.
    pub reused: usize,
}

pub fn records_path(spec: &ExperimentSpec) -> PathBuf {
    spec.output.join(RECORDS_FILE)
}

pub fn summary_path(spec: &ExperimentSpec) -> PathBuf {
    spec.output.join(SUMMARY_FILE)
}

fn partial_path(spec: &ExperimentSpec) -> PathBuf {
    spec.output.join(format!("{RECORDS_FILE}.partial"))
}

pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    if headers.iter().ne(RECORD_COLUMNS.iter().copied()) {
        let missing: Vec<&str> = RECORD_COLUMNS
            .iter()
            .copied()
            .filter(|c| !headers.iter().any(|h| h == *c))
            .collect();
        return Err(Error::MalformedRecords(format!(
            "{}: unexpected header (missing columns: {})",
            path.display(),
            if missing.is_empty() { "none, order differs".into() } else { missing.join(", ") }
        )));
    }
    reader
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

pub fn read_summary(path: &Path) -> Result<Vec<SummaryRow>> {
    csv::Reader::from_path(path)?
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

type RecordKey = (usize, usize, Method);

fn existing_records(spec: &ExperimentSpec) -> Result<BTreeMap<RecordKey, SweepRecord>> {
    let mut found = BTreeMap::new();
    if !spec.resume {
        return Ok(found);
    }
    for path in [records_path(spec), partial_path(spec)] {
        if path.exists() {
            for r in read_records(&path)? {
                found.insert((r.point, r.drop, r.method), r);
            }
        }
    }
    Ok(found)
}

fn run_drop(
    spec: &ExperimentSpec,
    point: &SweepPoint,
    cfg: &SystemConfig,
    drop: usize,
    methods: &[Method],
) -> Result<Vec<SweepRecord>> {
    let scene = drop_scene(
        spec.seed,
        point.side_index,
        drop,
        point.side_length,
        cfg.region_width,
        cfg.target_altitude,
    );
    let weights = IsacWeights::from_communication_share(point.weight)?;
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let design = crate::design(method, spec.link, &scene, &weights, cfg)?;
            let wall_time_us = start.elapsed().as_micros() as u64;
            let m = design.metrics;
            if !m.is_valid() {
                return Err(Error::MalformedRecords(format!(
                    "invalid metrics at point {} drop {drop} ({method}): {m:?}",
                    point.index
                )));
            }
            Ok(SweepRecord {
                experiment: spec.kind.as_str().to_owned(),
                method,
                link: spec.link,
                point: point.index,
                side_length: point.side_length,
                n_tx: point.n_tx,
                n_rx: point.n_rx,
                weight: point.weight,
                drop,
                user_x: scene.user.x,
                user_y: scene.user.y,
                target_x: scene.target.x,
                target_y: scene.target.y,
                target_z: scene.target.z,
                se_nats: m.spectral_efficiency,
                smi_nats: m.smi_bound,
                weighted_nats: m.weighted,
                se_bits: to_bits(m.spectral_efficiency),
                smi_bits: to_bits(m.smi_bound),
                weighted_bits: to_bits(m.weighted),
                sensing_power_w: design.powers.sensing(),
                bcd_iterations: design.bcd_iterations(),
                wall_time_us,
            })
        })
        .collect()
}

/// Runs every sweep point and drop, writing `records.csv` and `summary.csv`
/// under `spec.output` (or `validation.csv` for the validate experiment).
///
/// Records are written in (point, drop, method) order whatever the thread
/// schedule, and flushed after every point. With `spec.resume`, records
/// already on disk are kept and only the missing ones are computed.
pub fn run_experiment(spec: &ExperimentSpec, cfg: &SystemConfig) -> Result<ExperimentOutput> {
    spec.validate()?;
    cfg.validate()?;
    fs::create_dir_all(&spec.output)?;

    if spec.kind == ExperimentKind::Validate {
        let plan = ValidationPlan {
            seed: spec.seed,
            scenes: spec.drops,
            ..ValidationPlan::default()
        };
        let validation = run_validation(cfg, &plan)?;
        write_validation_csv(&spec.output.join(VALIDATION_FILE), &validation)?;
        return Ok(ExperimentOutput {
            validation,
            ..ExperimentOutput::default()
        });
    }

    let mut existing = existing_records(spec)?;
    let partial = partial_path(spec);
    let mut writer = csv::Writer::from_writer(File::create(&partial)?);
    writer.write_record(RECORD_COLUMNS)?;

    let mut records = Vec::new();
    let mut reused = 0;
    for point in spec.points() {
        let point_cfg = cfg
            .clone()
            .with_side_length(point.side_length)
            .with_elements(point.n_tx, point.n_rx);
        point_cfg.validate()?;

        let per_drop: Vec<Vec<SweepRecord>> = (0..spec.drops)
            .into_par_iter()
            .map(|drop| {
                let missing: Vec<Method> = spec
                    .methods
                    .iter()
                    .copied()
                    .filter(|m| !existing.contains_key(&(point.index, drop, *m)))
                    .collect();
                run_drop(spec, &point, &point_cfg, drop, &missing)
            })
            .collect::<Result<_>>()?;

        for (drop, mut fresh) in per_drop.into_iter().enumerate() {
            for &method in &spec.methods {
                let record = match existing.remove(&(point.index, drop, method)) {
                    Some(old) => {
                        if !old.belongs_to(spec, &point) {
                            return Err(Error::MalformedRecords(format!(
                                "record for point {} drop {drop} ({method}) does not match this experiment",
                                point.index
                            )));
                        }
                        reused += 1;
                        old
                    }
                    None => {
                        let i = fresh.iter().position(|r| r.method == method).expect("computed");
                        fresh.swap_remove(i)
                    }
                };
                writer.write_record(record.row())?;
                records.push(record);
            }
        }
        writer.flush()?;
        log::info!(
            "point {} (D_x = {}, N = {}, M = {}, weight = {}) done",
            point.index,
            point.side_length,
            point.n_tx,
            point.n_rx,
            point.weight
        );
    }
    writer.flush()?;
    drop(writer);
    fs::rename(&partial, records_path(spec))?;

    let summary = summarize(&records);
    write_summary(&summary_path(spec), &summary)?;
    Ok(ExperimentOutput {
        records,
        summary,
        validation: Vec::new(),
        reused,
    })
}

pub fn summarize(records: &[SweepRecord]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, Method), Vec<&SweepRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((r.point, r.method)).or_default().push(r);
    }
    groups
        .into_values()
        .map(|group| {
            let first = group[0];
            let col = |f: fn(&SweepRecord) -> f64| group.iter().map(|r| f(r)).collect::<Vec<f64>>();
            let (se_mean, se_ci95) = mean_ci95(&col(|r| r.se_nats));
            let (smi_mean, smi_ci95) = mean_ci95(&col(|r| r.smi_nats));
            let (weighted_mean, weighted_ci95) = mean_ci95(&col(|r| r.weighted_nats));
            let optional_mean = |values: Vec<Option<f64>>| {
                values
                    .into_iter()
                    .collect::<Option<Vec<f64>>>()
                    .map(|v| mean_ci95(&v).0)
            };
            SummaryRow {
                experiment: first.experiment.clone(),
                method: first.method,
                link: first.link,
                point: first.point,
                side_length: first.side_length,
                n_tx: first.n_tx,
                n_rx: first.n_rx,
                weight: first.weight,
                drops: group.len(),
                se_mean,
                se_ci95,
                smi_mean,
                smi_ci95,
                weighted_mean,
                weighted_ci95,
                se_bits_mean: to_bits(se_mean),
                smi_bits_mean: to_bits(smi_mean),
                weighted_bits_mean: to_bits(weighted_mean),
                sensing_power_mean_w: optional_mean(group.iter().map(|r| r.sensing_power_w).collect()),
                bcd_iterations_mean: optional_mean(
                    group.iter().map(|r| r.bcd_iterations.map(|i| i as f64)).collect(),
                ),
            }
        })
        .collect()
}

pub fn write_summary(path: &Path, rows: &[SummaryRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(SUMMARY_COLUMNS)?;
    for row in rows {
        writer.write_record(row.row())?;
    }
    writer.flush()?;
    Ok(())
}

/// Removes the trailing wall-time column from a records file, for
/// byte-level comparisons between runs.
pub fn strip_wall_time(contents: &str) -> String {
    let mut out = String::with_capacity(contents.len());
    for line in contents.lines() {
        let kept = line.rsplit_once(',').map_or(line, |(head, _)| head);
        out.push_str(kept);
        out.push('\n');
    }
    out
}
