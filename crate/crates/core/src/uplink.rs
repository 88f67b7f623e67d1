//! Uplink tuning by block coordinate descent.
//!
//! Each round fixes the receive layout, solves the scaled sensing power
//! `Q = |G_tx(u_t)|² P_s` in closed form, then re-partitions the receive
//! elements with the two-cluster approximation `Ŝ_ul(α)`. The communication
//! power is always `P_c^max`.

use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::design::{DesignSolution, Diagnostics, Link, Method, Powers};
use crate::downlink::{bipartition_layout, place_cluster, split_count, PartitionGeometry};
use crate::error::Result;
use crate::geometry::{aggregate_gain, PinchingLayout, Scene, WaveguideRole};
use crate::metrics::{
    smi_bound_from_gain, ul_rate_from_gains, weighted_objective, IsacWeights, MetricReport,
};
use crate::search::maximize_scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QBranch {
    Interior,
    BoundaryZero,
    BoundaryMax,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QSolution {
    pub q_star: f64,
    pub branch: QBranch,
    pub q0: Option<f64>,
    pub q_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcdTrace {
    pub iterations: usize,
    /// Exact scalarized objective after each power step.
    pub objectives: Vec<f64>,
    pub converged: bool,
}

pub fn tx_design_ul(scene: &Scene, cfg: &SystemConfig) -> Result<PinchingLayout> {
    place_cluster(WaveguideRole::Transmit, scene.target.x, cfg.n_tx, cfg)
}

/// Smallest non-negative root, in `q = ρ²|G_rx(u_t)|² Q + σ²`, of the
/// stationarity condition of `S̃_ul`:
///
/// `ω2 q² + A (ω2 - ω1 T) q + ω1 A σ² (T - 1) = 0`, with `A = |G_rx(u_u)|² P_c`.
///
/// `None` when `ω2 = 0` or no non-negative real root exists.
pub fn q_quadratic_root(rx_user_sq: f64, weights: &IsacWeights, cfg: &SystemConfig) -> Option<f64> {
    let (w1, w2) = (weights.communication, weights.sensing);
    if w2 <= 0.0 {
        return None;
    }
    let t = cfg.frame_length as f64;
    let a_gain = rx_user_sq * cfg.p_c_max;
    let a = w2;
    let b = a_gain * (w2 - w1 * t);
    let c = w1 * a_gain * cfg.noise_rx_ul * (t - 1.0);
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let s = -0.5 * (b + b.signum() * disc.sqrt());
    let mut roots = vec![s / a];
    if s != 0.0 {
        roots.push(c / s);
    } else {
        roots.push(0.0);
    }
    roots
        .into_iter()
        .filter(|r| r.is_finite() && *r >= 0.0)
        .min_by(f64::total_cmp)
}

/// `S̃_ul(Q)` for fixed receive gains: uplink SE plus SMI bound, both
/// written in terms of the scaled sensing power.
pub fn tilde_s_ul(
    q: f64,
    rx_user_sq: f64,
    rx_target_sq: f64,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> f64 {
    let se = ul_rate_from_gains(rx_user_sq, rx_target_sq, cfg.p_c_max, q, cfg);
    let smi = smi_bound_from_gain(rx_target_sq, q, cfg.noise_rx_ul, cfg);
    weighted_objective(se, smi, weights)
}

/// Closed-form scaled sensing power: the best of `0`, the interior
/// stationary point (when inside `[0, Q^max]`) and `Q^max`.
pub fn q_star(
    rx_user_sq: f64,
    rx_target_sq: f64,
    q_max: f64,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> QSolution {
    let b = cfg.rcs_variance * rx_target_sq;
    let q0 = q_quadratic_root(rx_user_sq, weights, cfg);
    let interior = match q0 {
        Some(root) if b > 0.0 => {
            let q = (root - cfg.noise_rx_ul) / b;
            (0.0..=q_max).contains(&q).then_some(q)
        }
        _ => None,
    };

    let eval = |q: f64| tilde_s_ul(q, rx_user_sq, rx_target_sq, weights, cfg);
    let mut best = (0.0, QBranch::BoundaryZero, eval(0.0));
    let candidates = interior
        .map(|q| (q, QBranch::Interior))
        .into_iter()
        .chain(std::iter::once((q_max, QBranch::BoundaryMax)));
    for (q, branch) in candidates {
        let v = eval(q);
        if v > best.2 {
            best = (q, branch, v);
        }
    }
    QSolution {
        q_star: best.0,
        branch: best.1,
        q0,
        q_max,
    }
}

/// `P_s = Q⋆ / |G_tx(u_t)|²`, clamped to `[0, P_s^max]`.
pub fn recover_sensing_power(
    q_star: f64,
    l_tx: &PinchingLayout,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<f64> {
    if q_star <= 0.0 {
        return Ok(0.0);
    }
    let gain_sq = aggregate_gain(l_tx, &scene.target, cfg)?.norm_sqr();
    if q_star >= gain_sq * cfg.p_s_max {
        if q_star > gain_sq * cfg.p_s_max * (1.0 + 1e-9) {
            log::warn!("scaled sensing power {q_star:e} exceeds Q^max; clamping P_s");
        }
        return Ok(cfg.p_s_max);
    }
    Ok(q_star / gain_sq)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Endpoint {
    User,
    Target,
}

/// Two-cluster approximation of the per-element receive gain, so that
/// `M² Ê(α)` approximates `|G_rx|²`.
pub fn e_hat(alpha: f64, which: Endpoint, scene: &Scene, cfg: &SystemConfig) -> Result<f64> {
    let geometry = PartitionGeometry::new(WaveguideRole::Receive, scene, cfg)?;
    Ok(e_hat_from(&geometry, alpha, which, cfg))
}

fn e_hat_from(g: &PartitionGeometry, alpha: f64, which: Endpoint, cfg: &SystemConfig) -> f64 {
    let beta_sq = cfg.beta() * cfg.beta();
    beta_sq
        * match which {
            Endpoint::User => g.user_term(alpha),
            Endpoint::Target => g.target_term(alpha),
        }
}

/// `Ŝ_ul(α)` at a fixed scaled sensing power.
pub fn s_hat_ul(
    alpha: f64,
    q: f64,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<f64> {
    let geometry = PartitionGeometry::new(WaveguideRole::Receive, scene, cfg)?;
    Ok(s_hat_from(&geometry, alpha, q, weights, cfg))
}

fn s_hat_from(
    g: &PartitionGeometry,
    alpha: f64,
    q: f64,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> f64 {
    let m_sq = (cfg.n_rx * cfg.n_rx) as f64;
    let user = m_sq * e_hat_from(g, alpha, Endpoint::User, cfg);
    let target = m_sq * e_hat_from(g, alpha, Endpoint::Target, cfg);
    tilde_s_ul(q, user, target, weights, cfg)
}

/// Grid argmax of `Ŝ_ul` over `α ∈ [0, 1]`.
pub fn solve_rx_partition(
    q: f64,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<(f64, f64)> {
    let geometry = PartitionGeometry::new(WaveguideRole::Receive, scene, cfg)?;
    Ok(maximize_scalar(
        |a| s_hat_from(&geometry, a, q, weights, cfg),
        0.0,
        1.0,
        cfg.grid_resolution,
    ))
}

pub fn rx_design_ul(alpha_star: f64, scene: &Scene, cfg: &SystemConfig) -> Result<PinchingLayout> {
    bipartition_layout(
        WaveguideRole::Receive,
        scene,
        split_count(alpha_star, cfg.n_rx),
        cfg,
    )
}

/// Evenly spread elements from one end of the waveguide to the other.
pub fn uniform_layout(role: WaveguideRole, cfg: &SystemConfig) -> PinchingLayout {
    let (lo, hi) = cfg.span(role);
    let n = cfg.element_count(role);
    let locations = if n == 1 {
        vec![0.5 * (lo + hi)]
    } else {
        (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect()
    };
    PinchingLayout::new(role, locations)
}

pub fn evaluate_uplink(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    p_c: f64,
    p_s: f64,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<MetricReport> {
    let tx_target_sq = aggregate_gain(l_tx, &scene.target, cfg)?.norm_sqr();
    let rx_user_sq = aggregate_gain(l_rx, &scene.user, cfg)?.norm_sqr();
    let rx_target_sq = aggregate_gain(l_rx, &scene.target, cfg)?.norm_sqr();
    let cascade_sq = tx_target_sq * rx_target_sq;
    let se = ul_rate_from_gains(rx_user_sq, cascade_sq, p_c, p_s, cfg);
    let smi = smi_bound_from_gain(cascade_sq, p_s, cfg.noise_rx_ul, cfg);
    Ok(MetricReport::new(se, smi, weights))
}

/// Power step for fixed layouts: `P_c = P_c^max` and the closed-form `P_s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerStep {
    pub q: QSolution,
    pub p_s: f64,
    pub metrics: MetricReport,
}

/// `(|G_rx(u_u)|², |G_rx(u_t)|², Q^max)` for fixed layouts.
pub fn aggregate_gains_ul(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<(f64, f64, f64)> {
    Ok((
        aggregate_gain(l_rx, &scene.user, cfg)?.norm_sqr(),
        aggregate_gain(l_rx, &scene.target, cfg)?.norm_sqr(),
        aggregate_gain(l_tx, &scene.target, cfg)?.norm_sqr() * cfg.p_s_max,
    ))
}

pub fn uplink_power_step(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<PowerStep> {
    let (rx_user_sq, rx_target_sq, q_max) = aggregate_gains_ul(l_tx, l_rx, scene, cfg)?;
    let q = q_star(rx_user_sq, rx_target_sq, q_max, weights, cfg);
    let p_s = recover_sensing_power(q.q_star, l_tx, scene, cfg)?;
    let metrics = evaluate_uplink(l_tx, l_rx, cfg.p_c_max, p_s, scene, weights, cfg)?;
    Ok(PowerStep { q, p_s, metrics })
}

pub fn design_uplink(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<DesignSolution> {
    let tx_layout = tx_design_ul(scene, cfg)?;
    let mut rx_layout = uniform_layout(WaveguideRole::Receive, cfg);
    let mut split: Option<f64> = None;

    let mut objectives = Vec::new();
    let mut converged = false;
    let mut best: Option<(PinchingLayout, Option<f64>, PowerStep)> = None;

    for _ in 0..cfg.bcd_max_iterations.max(1) {
        let step = uplink_power_step(&tx_layout, &rx_layout, scene, weights, cfg)?;
        let objective = step.metrics.weighted;
        if best
            .as_ref()
            .is_none_or(|(_, _, b)| objective > b.metrics.weighted)
        {
            best = Some((rx_layout.clone(), split, step));
        }
        let previous = objectives.last().copied();
        objectives.push(objective);
        if let Some(prev) = previous {
            if (objective - prev).abs() <= cfg.bcd_tolerance * prev.abs() {
                converged = true;
                break;
            }
        }

        let (alpha, _) = solve_rx_partition(step.q.q_star, scene, weights, cfg)?;
        let candidate = rx_design_ul(alpha, scene, cfg)?;
        // Accept the receive step only if the exact objective does not drop;
        // the plain alternation can otherwise cycle between two layouts.
        let trial = evaluate_uplink(&tx_layout, &candidate, cfg.p_c_max, step.p_s, scene, weights, cfg)?;
        if trial.weighted >= objective {
            rx_layout = candidate;
            split = Some(alpha);
        }
    }

    let (rx_layout, alpha_star, step) = best.expect("at least one BCD iteration");
    let trace = BcdTrace {
        iterations: objectives.len(),
        objectives,
        converged,
    };
    if !trace.converged {
        log::warn!("uplink BCD stopped after {} iterations without converging", trace.iterations);
    }
    Ok(DesignSolution {
        link: Link::Uplink,
        method: Method::Pass,
        tx_layout,
        rx_layout,
        tx_weights: None,
        rx_weights: None,
        powers: Powers::Uplink {
            communication: cfg.p_c_max,
            sensing: step.p_s,
        },
        metrics: step.metrics,
        diagnostics: Diagnostics::PassUplink {
            q: step.q,
            alpha_star,
            n_user: alpha_star.map(|a| split_count(a, cfg.n_rx)),
            trace,
        },
    })
}
