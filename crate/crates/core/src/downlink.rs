//! One-shot downlink tuning.
//!
//! The receive waveguide clusters every element around the target. The
//! transmit elements are split into a user-centred and a target-centred
//! cluster; the split ratio maximises the two-cluster approximation `F(α)` of
//! the weighted channel gains.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::design::{DesignSolution, Diagnostics, Link, Method, Powers};
use crate::error::Result;
use crate::geometry::{
    aggregate_gain, cluster_positions, distance_to_element, project_feasible, PinchingLayout,
    Scene, Vec3, WaveguideRole,
};
use crate::metrics::{
    smi_bound_from_gain, snr_rate, weighted_objective, IsacWeights, MetricReport,
};
use crate::search::maximize_scalar;

/// Split found by the bi-partitioning step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionResult {
    pub alpha_star: f64,
    /// Elements placed around the user, `⌊N α⋆⌋`.
    pub n_user: usize,
    /// `F(α⋆)`; for a sensing-only weighting this is the target term alone.
    pub objective_value: f64,
    pub zeta_u: Complex64,
    pub zeta_t: Complex64,
}

/// Exact-objective check of the chosen split against the single-cluster
/// endpoints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SafetyNet {
    pub algorithm_objective: f64,
    pub endpoint_objective: f64,
    /// `max(0, endpoint - algorithm)`.
    pub approximation_gap: f64,
    pub replaced: bool,
}

/// Distances and relative phases between the two cluster centres, seen from
/// the user and from the target.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionGeometry {
    /// Element at `x_u` to the user.
    pub d_u1: f64,
    /// Element at `x_t` to the user.
    pub d_u2: f64,
    /// Element at `x_t` to the target.
    pub d_t1: f64,
    /// Element at `x_u` to the target.
    pub d_t2: f64,
    /// Phase of the target cluster relative to the user cluster, at the user.
    pub zeta_u: Complex64,
    /// Phase of the user cluster relative to the target cluster, at the target.
    pub zeta_t: Complex64,
}

impl PartitionGeometry {
    pub fn new(role: WaveguideRole, scene: &Scene, cfg: &SystemConfig) -> Result<Self> {
        let (xu, xt) = (scene.user.x, scene.target.x);
        Ok(Self {
            d_u1: distance_to_element(role, xu, &scene.user, cfg)?,
            d_u2: distance_to_element(role, xt, &scene.user, cfg)?,
            d_t1: distance_to_element(role, xt, &scene.target, cfg)?,
            d_t2: distance_to_element(role, xu, &scene.target, cfg)?,
            zeta_u: phase_factor(role, xu, xt, &scene.user, cfg)?,
            zeta_t: phase_factor(role, xt, xu, &scene.target, cfg)?,
        })
    }

    /// `|α / D_u1 + (1 - α) ζ_u / D_u2|²`
    pub fn user_term(&self, alpha: f64) -> f64 {
        (Complex64::from(alpha / self.d_u1) + self.zeta_u * ((1.0 - alpha) / self.d_u2)).norm_sqr()
    }

    /// `|α ζ_t / D_t2 + (1 - α) / D_t1|²`
    pub fn target_term(&self, alpha: f64) -> f64 {
        (self.zeta_t * (alpha / self.d_t2) + Complex64::from((1.0 - alpha) / self.d_t1)).norm_sqr()
    }

    /// `F(α)` with `ratio = ω2 / ω1`. The common `β² N` factor is dropped.
    pub fn objective(&self, alpha: f64, ratio: f64) -> f64 {
        let sensing = if ratio == 0.0 {
            0.0
        } else {
            ratio * self.target_term(alpha)
        };
        self.user_term(alpha) + sensing
    }
}

/// Relative phase of a cluster centred at `center_b` with respect to one at
/// `center_a`, both seen from `point`:
/// `exp(-jκ[(D(b) - D(a)) + i_ref (b - a)])`.
pub fn phase_factor(
    role: WaveguideRole,
    center_a: f64,
    center_b: f64,
    point: &Vec3,
    cfg: &SystemConfig,
) -> Result<Complex64> {
    let da = distance_to_element(role, center_a, point, cfg)?;
    let db = distance_to_element(role, center_b, point, cfg)?;
    let phase = -cfg.wavenumber() * ((db - da) + cfg.refractive_index * (center_b - center_a));
    Ok(Complex64::from_polar(1.0, phase))
}

/// Pitch-spaced symmetric cluster around `center`, projected onto the
/// feasible set of the waveguide.
pub fn place_cluster(
    role: WaveguideRole,
    center: f64,
    count: usize,
    cfg: &SystemConfig,
) -> Result<PinchingLayout> {
    let raw = PinchingLayout::new(role, cluster_positions(center, count, cfg.cluster_pitch()));
    project_feasible(&raw, cfg)
}

/// `n_user` elements clustered at the user's x and the rest at the target's.
pub fn bipartition_layout(
    role: WaveguideRole,
    scene: &Scene,
    n_user: usize,
    cfg: &SystemConfig,
) -> Result<PinchingLayout> {
    let count = cfg.element_count(role);
    let n_user = n_user.min(count);
    let pitch = cfg.cluster_pitch();
    let mut raw = cluster_positions(scene.user.x, n_user, pitch);
    raw.extend(cluster_positions(scene.target.x, count - n_user, pitch));
    project_feasible(&PinchingLayout::new(role, raw), cfg)
}

/// `⌊count · α⌋`, tolerant of grid values such as `0.29 · 100 = 28.999…`.
pub fn split_count(alpha: f64, count: usize) -> usize {
    ((count as f64 * alpha + 1e-9).floor().max(0.0) as usize).min(count)
}

pub fn rx_design_dl(scene: &Scene, cfg: &SystemConfig) -> Result<PinchingLayout> {
    place_cluster(WaveguideRole::Receive, scene.target.x, cfg.n_rx, cfg)
}

pub fn partition_objective(
    alpha: f64,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<f64> {
    let geometry = PartitionGeometry::new(WaveguideRole::Transmit, scene, cfg)?;
    Ok(geometry.objective(alpha, weights.sensing / weights.communication))
}

pub fn solve_partition(
    geometry: &PartitionGeometry,
    weights: &IsacWeights,
    count: usize,
    resolution: usize,
) -> PartitionResult {
    let (alpha_star, objective_value) = if weights.communication == 0.0 {
        (0.0, geometry.target_term(0.0))
    } else {
        let ratio = weights.sensing / weights.communication;
        maximize_scalar(|a| geometry.objective(a, ratio), 0.0, 1.0, resolution)
    };
    PartitionResult {
        alpha_star,
        n_user: split_count(alpha_star, count),
        objective_value,
        zeta_u: geometry.zeta_u,
        zeta_t: geometry.zeta_t,
    }
}

pub fn tx_design_dl(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<(PinchingLayout, PartitionResult)> {
    let geometry = PartitionGeometry::new(WaveguideRole::Transmit, scene, cfg)?;
    let partition = solve_partition(&geometry, weights, cfg.n_tx, cfg.grid_resolution);
    let layout = bipartition_layout(WaveguideRole::Transmit, scene, partition.n_user, cfg)?;
    Ok((layout, partition))
}

/// Exact downlink metrics of a configuration.
pub fn evaluate_downlink(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    power: f64,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<MetricReport> {
    let to_user = aggregate_gain(l_tx, &scene.user, cfg)?.norm_sqr();
    let to_target = aggregate_gain(l_tx, &scene.target, cfg)?.norm_sqr();
    let from_target = aggregate_gain(l_rx, &scene.target, cfg)?.norm_sqr();
    let se = snr_rate(to_user, power, cfg.noise_user);
    let smi = smi_bound_from_gain(to_target * from_target, power, cfg.noise_rx_dl, cfg);
    Ok(MetricReport::new(se, smi, weights))
}

pub fn design_downlink(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<DesignSolution> {
    let rx_layout = rx_design_dl(scene, cfg)?;
    let (mut tx_layout, partition) = tx_design_dl(scene, weights, cfg)?;
    let power = cfg.p_max;
    let mut metrics = evaluate_downlink(&tx_layout, &rx_layout, power, scene, weights, cfg)?;
    let algorithm_objective = metrics.weighted;

    let mut endpoint_objective = f64::NEG_INFINITY;
    let mut replaced = false;
    for n_user in [0, cfg.n_tx] {
        let candidate = bipartition_layout(WaveguideRole::Transmit, scene, n_user, cfg)?;
        let report = evaluate_downlink(&candidate, &rx_layout, power, scene, weights, cfg)?;
        endpoint_objective = endpoint_objective.max(report.weighted);
        if report.weighted > metrics.weighted {
            tx_layout = candidate;
            metrics = report;
            replaced = true;
        }
    }
    let approximation_gap = (endpoint_objective - algorithm_objective).max(0.0);
    if replaced {
        log::debug!(
            "downlink split n_user={} lost {approximation_gap:.3e} nats to a single-cluster endpoint",
            partition.n_user
        );
    }
    debug_assert!((metrics.weighted
        - weighted_objective(metrics.spectral_efficiency, metrics.smi_bound, weights))
    .abs()
        < 1e-12);

    Ok(DesignSolution {
        link: Link::Downlink,
        method: Method::Pass,
        tx_layout,
        rx_layout,
        tx_weights: None,
        rx_weights: None,
        powers: Powers::Downlink { transmit: power },
        metrics,
        diagnostics: Diagnostics::PassDownlink {
            partition,
            safety_net: SafetyNet {
                algorithm_objective,
                endpoint_objective,
                approximation_gap,
                replaced,
            },
        },
    })
}
