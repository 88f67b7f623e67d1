//! Brute-force references for the closed forms and the partition heuristics.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SystemConfig;
use crate::design::Link;
use crate::downlink::{bipartition_layout, design_downlink, evaluate_downlink, rx_design_dl};
use crate::error::{Error, Result};
use crate::experiment::sampling::drop_scene;
use crate::geometry::{
    aggregate_gain, cascade_gain, project_feasible, PinchingLayout, Scene, WaveguideRole,
};
use crate::metrics::{mc_smi_estimate, smi_bound_from_gain, IsacWeights, SmiEstimate, WaveformLaw};
use crate::uplink::{
    aggregate_gains_ul, design_uplink, q_star, tilde_s_ul, tx_design_ul, uplink_power_step,
};

pub const MAX_ORACLE_ELEMENTS: usize = 2;
pub const MAX_ORACLE_GRID_POINTS: usize = 64;
/// Power grid used inside the joint layout search.
const JOINT_POWER_GRID: usize = 1_001;

#[derive(Debug, Clone, PartialEq)]
pub struct PartitionOracle {
    pub best_split: usize,
    pub best_objective: f64,
    /// Exact objective for every split `0..=count`.
    pub objectives: Vec<f64>,
}

/// Exact objective of every user/target split of the tuned waveguide, using
/// the same two-cluster template placements as the algorithms.
pub fn exhaustive_partition(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
    link: Link,
) -> Result<PartitionOracle> {
    let objectives: Vec<f64> = match link {
        Link::Downlink => {
            let rx = rx_design_dl(scene, cfg)?;
            (0..=cfg.n_tx)
                .map(|n1| {
                    let tx = bipartition_layout(WaveguideRole::Transmit, scene, n1, cfg)?;
                    Ok(evaluate_downlink(&tx, &rx, cfg.p_max, scene, weights, cfg)?.weighted)
                })
                .collect::<Result<_>>()?
        }
        Link::Uplink => {
            let tx = tx_design_ul(scene, cfg)?;
            (0..=cfg.n_rx)
                .map(|m1| {
                    let rx = bipartition_layout(WaveguideRole::Receive, scene, m1, cfg)?;
                    Ok(uplink_power_step(&tx, &rx, scene, weights, cfg)?.metrics.weighted)
                })
                .collect::<Result<_>>()?
        }
    };
    let (best_split, best_objective) = objectives
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |best, (i, v)| if v > best.1 { (i, v) } else { best });
    Ok(PartitionOracle {
        best_split,
        best_objective,
        objectives,
    })
}

/// Uniform grid on `[0, q_max]` including both ends; the first maximum wins.
pub fn grid_search_power<F>(mut objective: F, q_max: f64, resolution: usize) -> (f64, f64)
where
    F: FnMut(f64) -> f64,
{
    let steps = resolution.max(2) - 1;
    let mut best = (0.0, f64::NEG_INFINITY);
    for i in 0..=steps {
        let q = if i == steps {
            q_max
        } else {
            q_max * i as f64 / steps as f64
        };
        let v = objective(q);
        if v > best.1 {
            best = (q, v);
        }
    }
    best
}

/// Evenly spaced candidate locations covering the waveguide span.
pub fn lattice(role: WaveguideRole, points: usize, cfg: &SystemConfig) -> Vec<f64> {
    let (lo, hi) = cfg.span(role);
    let last = points.max(2) - 1;
    (0..=last)
        .map(|i| if i == last { hi } else { lo + (hi - lo) * i as f64 / last as f64 })
        .collect()
}

/// Moves every element to its nearest lattice point.
pub fn snap_to_lattice(layout: &PinchingLayout, points: usize, cfg: &SystemConfig) -> PinchingLayout {
    let grid = lattice(layout.role, points, cfg);
    let (lo, hi) = cfg.span(layout.role);
    let last = (grid.len() - 1) as f64;
    let locations = layout
        .locations
        .iter()
        .map(|&x| {
            let i = ((x - lo) / (hi - lo) * last).round().clamp(0.0, last) as usize;
            grid[i]
        })
        .collect();
    PinchingLayout::new(layout.role, locations)
}

/// Exact scalarized objective of fixed layouts with the power chosen
/// optimally: `P_max` downlink; uplink the better of the closed-form `Q⋆`
/// and a grid over `Q`.
pub fn layout_objective(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
    link: Link,
) -> Result<f64> {
    match link {
        Link::Downlink => Ok(evaluate_downlink(l_tx, l_rx, cfg.p_max, scene, weights, cfg)?.weighted),
        Link::Uplink => {
            let closed = uplink_power_step(l_tx, l_rx, scene, weights, cfg)?.metrics.weighted;
            let (user, target, q_max) = aggregate_gains_ul(l_tx, l_rx, scene, cfg)?;
            let (_, grid) = grid_search_power(
                |q| tilde_s_ul(q, user, target, weights, cfg),
                q_max,
                JOINT_POWER_GRID,
            );
            Ok(closed.max(grid))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointOracle {
    pub tx_layout: PinchingLayout,
    pub rx_layout: PinchingLayout,
    pub objective: f64,
    pub evaluations: usize,
}

fn lattice_layouts(role: WaveguideRole, points: usize, cfg: &SystemConfig) -> Vec<PinchingLayout> {
    let grid = lattice(role, points, cfg);
    let count = cfg.element_count(role);
    let mut out = Vec::new();
    match count {
        1 => out.extend(grid.iter().map(|&x| PinchingLayout::new(role, vec![x]))),
        2 => {
            for i in 0..grid.len() {
                for j in i + 1..grid.len() {
                    let layout = PinchingLayout::new(role, vec![grid[i], grid[j]]);
                    if layout.is_feasible(cfg) {
                        out.push(layout);
                    }
                }
            }
        }
        _ => unreachable!("guarded by the caller"),
    }
    out
}

/// Exhaustive search over lattice layouts of both waveguides. Ties go to the
/// lexicographically smallest `(tx, rx)` pair.
pub fn joint_layout_grid_search(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
    link: Link,
    grid_points_per_element: usize,
) -> Result<JointOracle> {
    if cfg.n_tx > MAX_ORACLE_ELEMENTS
        || cfg.n_rx > MAX_ORACLE_ELEMENTS
        || cfg.n_tx == 0
        || cfg.n_rx == 0
    {
        return Err(Error::InstanceTooLarge(format!(
            "N = {}, M = {} (each must be 1..={MAX_ORACLE_ELEMENTS})",
            cfg.n_tx, cfg.n_rx
        )));
    }
    if !(2..=MAX_ORACLE_GRID_POINTS).contains(&grid_points_per_element) {
        return Err(Error::InstanceTooLarge(format!(
            "{grid_points_per_element} grid points (must be 2..={MAX_ORACLE_GRID_POINTS})"
        )));
    }
    let tx_candidates = lattice_layouts(WaveguideRole::Transmit, grid_points_per_element, cfg);
    let rx_candidates = lattice_layouts(WaveguideRole::Receive, grid_points_per_element, cfg);
    let per_tx: Vec<(usize, f64)> = tx_candidates
        .par_iter()
        .map(|tx| {
            let mut best = (0, f64::NEG_INFINITY);
            for (j, rx) in rx_candidates.iter().enumerate() {
                let v = layout_objective(tx, rx, scene, weights, cfg, link)?;
                if v > best.1 {
                    best = (j, v);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;
    let (i, (j, objective)) = per_tx
        .into_iter()
        .enumerate()
        .fold((0, (0, f64::NEG_INFINITY)), |best, (i, b)| {
            if b.1 > best.1 .1 {
                (i, b)
            } else {
                best
            }
        });
    Ok(JointOracle {
        tx_layout: tx_candidates[i].clone(),
        rx_layout: rx_candidates[j].clone(),
        objective,
        evaluations: tx_candidates.len() * rx_candidates.len(),
    })
}

/// One configuration for the Jensen check.
#[derive(Debug, Clone, PartialEq)]
pub struct JensenCase {
    pub scene: Scene,
    pub l_tx: PinchingLayout,
    pub l_rx: PinchingLayout,
    pub power: f64,
    pub link: Link,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JensenEntry {
    pub gaussian: SmiEstimate,
    /// Bound minus the constant-modulus estimate; zero by construction.
    pub constant_modulus_gap: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JensenReport {
    pub entries: Vec<JensenEntry>,
    pub all_passed: bool,
    pub max_gap: f64,
    pub mean_gap: f64,
}

/// Compares Monte-Carlo SMI estimates with the Jensen bound. A case passes
/// when the Gaussian estimate is below `bound + 3·stderr` and the
/// constant-modulus waveform meets the bound exactly.
pub fn jensen_check(
    cases: &[JensenCase],
    n_draws: usize,
    seed: u64,
    cfg: &SystemConfig,
) -> Result<JensenReport> {
    let entries: Vec<JensenEntry> = cases
        .par_iter()
        .enumerate()
        .map(|(i, case)| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let estimate = |law, draws, rng: &mut ChaCha8Rng| {
                mc_smi_estimate(&case.l_tx, &case.l_rx, case.power, case.link, cfg, &case.scene, law, draws, rng)
            };
            let gaussian = estimate(WaveformLaw::GaussianIid, n_draws, &mut rng)?;
            let constant = estimate(WaveformLaw::ConstantModulus, 1, &mut rng)?;
            let constant_modulus_gap = constant.jensen_gap();
            let passed = gaussian.mean <= gaussian.bound + 3.0 * gaussian.std_error
                && constant_modulus_gap == 0.0;
            Ok(JensenEntry {
                gaussian,
                constant_modulus_gap,
                passed,
            })
        })
        .collect::<Result<_>>()?;
    let gaps: Vec<f64> = entries.iter().map(|e| e.gaussian.jensen_gap()).collect();
    Ok(JensenReport {
        all_passed: entries.iter().all(|e| e.passed),
        max_gap: gaps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        mean_gap: gaps.iter().sum::<f64>() / gaps.len().max(1) as f64,
        entries,
    })
}

/// Random feasible layout: uniform locations projected onto the feasible set.
pub fn random_layout<R: Rng + ?Sized>(
    role: WaveguideRole,
    cfg: &SystemConfig,
    rng: &mut R,
) -> Result<PinchingLayout> {
    let (lo, hi) = cfg.span(role);
    let raw = (0..cfg.element_count(role))
        .map(|_| rng.random_range(lo..=hi))
        .collect();
    project_feasible(&PinchingLayout::new(role, raw), cfg)
}

/// Random scenes, layouts, powers and links under `cfg`.
pub fn random_jensen_cases(count: usize, seed: u64, cfg: &SystemConfig) -> Result<Vec<JensenCase>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            let scene = drop_scene(seed, 0, i, cfg.tx_length, cfg.region_width, cfg.target_altitude);
            let link = if rng.random_bool(0.5) { Link::Downlink } else { Link::Uplink };
            let max = match link {
                Link::Downlink => cfg.p_max,
                Link::Uplink => cfg.p_s_max,
            };
            Ok(JensenCase {
                scene,
                l_tx: random_layout(WaveguideRole::Transmit, cfg, &mut rng)?,
                l_rx: random_layout(WaveguideRole::Receive, cfg, &mut rng)?,
                power: rng.random_range(0.0..=max),
                link,
            })
        })
        .collect()
}

/// One line of `validation.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationRecord {
    pub name: String,
    /// SHA-256 of the check's inputs.
    pub inputs_digest: String,
    pub passed: bool,
    pub gap: f64,
}

impl ValidationRecord {
    pub fn new(name: &str, inputs: &impl std::fmt::Debug, passed: bool, gap: f64) -> Self {
        Self {
            name: name.to_owned(),
            inputs_digest: inputs_digest(inputs),
            passed,
            gap,
        }
    }
}

pub fn inputs_digest(inputs: &impl std::fmt::Debug) -> String {
    hex::encode(Sha256::digest(format!("{inputs:?}").as_bytes()))
}

pub fn write_validation_csv(path: &Path, records: &[ValidationRecord]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationPlan {
    pub seed: u64,
    /// Scenes for the partition, power and cascade checks.
    pub scenes: usize,
    pub global_scenes: usize,
    pub global_grid_points: usize,
    pub jensen_cases: usize,
    pub jensen_draws: usize,
}

impl Default for ValidationPlan {
    fn default() -> Self {
        Self {
            seed: 2025,
            scenes: 100,
            global_scenes: 50,
            global_grid_points: 32,
            jensen_cases: 20,
            jensen_draws: 10_000,
        }
    }
}

pub const PARTITION_RATIO: f64 = 0.95;
/// Communication weights of the downlink experiments.
pub const PARTITION_WEIGHTS: [f64; 3] = [0.0, 0.5, 1.0];
pub const POWER_TOLERANCE: f64 = 1e-9;
pub const GLOBAL_TOLERANCE: f64 = 1e-9;
pub const CASCADE_TOLERANCE: f64 = 1e-12;

/// Cascade factorization error `||G|² - |G_tx|²|G_rx|²| / |G|²`.
pub fn cascade_factorization_error(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<f64> {
    let cascade = cascade_gain(l_tx, l_rx, &scene.target, cfg)?.norm_sqr();
    let tx = aggregate_gain(l_tx, &scene.target, cfg)?.norm_sqr();
    let rx = aggregate_gain(l_rx, &scene.target, cfg)?.norm_sqr();
    Ok(((cascade - tx * rx) / cascade).abs())
}

/// Downlink: the design's exact objective over the best split's.
pub fn partition_ratio(scene: &Scene, weights: &IsacWeights, cfg: &SystemConfig) -> Result<(f64, PartitionOracle)> {
    let design = design_downlink(scene, weights, cfg)?;
    let oracle = exhaustive_partition(scene, weights, cfg, Link::Downlink)?;
    Ok((design.metrics.weighted / oracle.best_objective, oracle))
}

/// `S̃_ul(Q⋆)` against a 10⁴-point grid, for the receive layout that the
/// uplink design returns. Returns `grid max - closed form`.
pub fn q_star_grid_gap(scene: &Scene, weights: &IsacWeights, cfg: &SystemConfig) -> Result<f64> {
    let design = design_uplink(scene, weights, cfg)?;
    let (user, target, q_max) = aggregate_gains_ul(&design.tx_layout, &design.rx_layout, scene, cfg)?;
    let closed = q_star(user, target, q_max, weights, cfg);
    let closed_value = tilde_s_ul(closed.q_star, user, target, weights, cfg);
    let (_, grid) = grid_search_power(|q| tilde_s_ul(q, user, target, weights, cfg), q_max, 10_000);
    Ok(grid - closed_value)
}

/// Tiny-instance global check: the design snapped to the lattice can never
/// beat the exhaustive lattice optimum. Returns `snapped - oracle`.
pub fn global_oracle_gap(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
    link: Link,
    points: usize,
) -> Result<f64> {
    let design = crate::design(crate::Method::Pass, link, scene, weights, cfg)?;
    let tx = snap_to_lattice(&design.tx_layout, points, cfg);
    let rx = snap_to_lattice(&design.rx_layout, points, cfg);
    let snapped = layout_objective(&tx, &rx, scene, weights, cfg, link)?;
    let oracle = joint_layout_grid_search(scene, weights, cfg, link, points)?;
    Ok(snapped - oracle.objective)
}

/// Runs every oracle comparison and returns one record per check.
pub fn run_validation(cfg: &SystemConfig, plan: &ValidationPlan) -> Result<Vec<ValidationRecord>> {
    let mut weight_rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x5eed);
    let scenes: Vec<(Scene, IsacWeights)> = (0..plan.scenes.max(plan.global_scenes))
        .map(|i| {
            let scene = drop_scene(plan.seed, 0, i, cfg.tx_length, cfg.region_width, cfg.target_altitude);
            let weights = IsacWeights::from_communication_share(weight_rng.random())?;
            Ok((scene, weights))
        })
        .collect::<Result<_>>()?;

    let mut records = Vec::new();
    let mut layout_rng = ChaCha8Rng::seed_from_u64(plan.seed ^ 0x1a70);
    for (scene, _) in scenes.iter().take(plan.scenes) {
        let tx = random_layout(WaveguideRole::Transmit, cfg, &mut layout_rng)?;
        let rx = random_layout(WaveguideRole::Receive, cfg, &mut layout_rng)?;
        let err = cascade_factorization_error(&tx, &rx, scene, cfg)?;
        records.push(ValidationRecord::new(
            "cascade-factorization",
            &(scene, &tx, &rx),
            err <= CASCADE_TOLERANCE,
            err,
        ));
    }

    let checks: Vec<Vec<ValidationRecord>> = scenes
        .par_iter()
        .take(plan.scenes)
        .map(|(scene, weights)| {
            let mut out = Vec::new();
            for share in PARTITION_WEIGHTS {
                let w = IsacWeights::from_communication_share(share)?;
                let (ratio, _) = partition_ratio(scene, &w, cfg)?;
                out.push(ValidationRecord::new(
                    "partition-downlink",
                    &(scene, w),
                    ratio >= PARTITION_RATIO,
                    1.0 - ratio,
                ));
            }
            let gap = q_star_grid_gap(scene, weights, cfg)?;
            out.push(ValidationRecord::new("q-star-grid", &(scene, weights), gap <= POWER_TOLERANCE, gap));
            Ok(out)
        })
        .collect::<Result<_>>()?;
    records.extend(checks.into_iter().flatten());

    let tiny = cfg.clone().with_elements(1, 1);
    let global: Vec<Vec<ValidationRecord>> = scenes
        .par_iter()
        .take(plan.global_scenes)
        .map(|(scene, weights)| {
            [Link::Downlink, Link::Uplink]
                .into_iter()
                .map(|link| {
                    let gap = global_oracle_gap(scene, weights, &tiny, link, plan.global_grid_points)?;
                    Ok(ValidationRecord::new(
                        &format!("global-tiny-{link}"),
                        &(scene, weights, plan.global_grid_points),
                        gap <= GLOBAL_TOLERANCE,
                        gap,
                    ))
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<_>>()?;
    records.extend(global.into_iter().flatten());

    let cases = random_jensen_cases(plan.jensen_cases, plan.seed, cfg)?;
    let report = jensen_check(&cases, plan.jensen_draws, plan.seed, cfg)?;
    for (case, entry) in cases.iter().zip(&report.entries) {
        records.push(ValidationRecord::new(
            "jensen",
            &(case, plan.jensen_draws),
            entry.passed,
            entry.gaussian.jensen_gap(),
        ));
    }
    Ok(records)
}

/// Closed-form SMI bound of a configuration, for the Jensen comparison.
pub fn smi_bound_of(case: &JensenCase, cfg: &SystemConfig) -> Result<f64> {
    let g = cascade_gain(&case.l_tx, &case.l_rx, &case.scene.target, cfg)?.norm_sqr();
    let noise = match case.link {
        Link::Downlink => cfg.noise_rx_dl,
        Link::Uplink => cfg.noise_rx_ul,
    };
    Ok(smi_bound_from_gain(g, case.power, noise, cfg))
}
