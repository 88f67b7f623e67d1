//! Fixed half-wavelength arrays with unit-modulus analog beamforming.
//!
//! Weights come from a one-parameter family that interpolates, element by
//! element, between the conjugate phases toward the target (`θ = 0`) and
//! toward the user (`θ = 1`). `θ` is picked by grid search on the exact
//! scalarized objective.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::design::{DesignSolution, Diagnostics, Link, Method, Powers};
use crate::error::{Error, Result};
use crate::geometry::{cluster_positions, element_gain, PinchingLayout, Scene, Vec3, WaveguideRole};
use crate::metrics::{smi_bound_from_gain, snr_rate, ul_rate_from_gains, IsacWeights, MetricReport};
use crate::search::maximize_scalar;
use crate::uplink::{q_star, tilde_s_ul};

const UNIT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Complex64>", into = "Vec<Complex64>")]
pub struct AnalogWeights(Vec<Complex64>);

impl AnalogWeights {
    pub fn new(weights: Vec<Complex64>) -> Result<Self> {
        if let Some(w) = weights.iter().find(|w| (w.norm() - 1.0).abs() > UNIT_TOLERANCE) {
            return Err(Error::InvalidConfig {
                field: "analog_weights",
                reason: format!("weight {w} is not unit modulus"),
            });
        }
        Ok(Self(weights))
    }

    pub fn from_phases(phases: impl IntoIterator<Item = f64>) -> Self {
        Self(phases.into_iter().map(|p| Complex64::from_polar(1.0, p)).collect())
    }

    pub fn uniform(count: usize) -> Self {
        Self(vec![Complex64::new(1.0, 0.0); count])
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<Complex64>> for AnalogWeights {
    type Error = Error;

    fn try_from(weights: Vec<Complex64>) -> Result<Self> {
        Self::new(weights)
    }
}

impl From<AnalogWeights> for Vec<Complex64> {
    fn from(weights: AnalogWeights) -> Self {
        weights.0
    }
}

/// `count` antennas at half-wavelength spacing, centred at `x = 0`.
pub fn baseline_layout(role: WaveguideRole, count: usize, cfg: &SystemConfig) -> PinchingLayout {
    PinchingLayout::new(role, cluster_positions(0.0, count, cfg.wavelength() / 2.0))
}

fn element_gains(layout: &PinchingLayout, point: &Vec3, cfg: &SystemConfig) -> Result<Vec<Complex64>> {
    if layout.is_empty() {
        return Err(Error::EmptyLayout { role: layout.role });
    }
    layout
        .locations
        .iter()
        .map(|&l| element_gain(layout.role, l, point, cfg))
        .collect()
}

fn weighted_sum(weights: &[Complex64], gains: &[Complex64]) -> Complex64 {
    weights.iter().zip(gains).map(|(w, g)| w * g).sum()
}

/// `Σ w_n g(ℓ_n, point)`.
pub fn beamform_gain(
    layout: &PinchingLayout,
    weights: &AnalogWeights,
    point: &Vec3,
    cfg: &SystemConfig,
) -> Result<Complex64> {
    debug_assert_eq!(layout.len(), weights.len());
    Ok(weighted_sum(weights.as_slice(), &element_gains(layout, point, cfg)?))
}

/// Conjugate-phase weights that align every element toward `point`.
pub fn phase_match(layout: &PinchingLayout, point: &Vec3, cfg: &SystemConfig) -> Result<AnalogWeights> {
    Ok(AnalogWeights::from_phases(
        element_gains(layout, point, cfg)?.iter().map(|g| -g.arg()),
    ))
}

fn wrap_phase(phase: f64) -> f64 {
    let wrapped = (phase + PI).rem_euclid(2.0 * PI) - PI;
    if wrapped == -PI {
        PI
    } else {
        wrapped
    }
}

/// Per-element phase interpolation between two conjugate matches along the
/// shorter arc.
#[derive(Debug, Clone)]
pub struct BlendedWeights {
    target_phases: Vec<f64>,
    offsets: Vec<f64>,
}

impl BlendedWeights {
    pub fn new(layout: &PinchingLayout, user: &Vec3, target: &Vec3, cfg: &SystemConfig) -> Result<Self> {
        let to_user = element_gains(layout, user, cfg)?;
        let to_target = element_gains(layout, target, cfg)?;
        let target_phases: Vec<f64> = to_target.iter().map(|g| -g.arg()).collect();
        let offsets = to_user
            .iter()
            .zip(&target_phases)
            .map(|(g, t)| wrap_phase(-g.arg() - t))
            .collect();
        Ok(Self {
            target_phases,
            offsets,
        })
    }

    pub fn at(&self, theta: f64) -> AnalogWeights {
        AnalogWeights::from_phases(
            self.target_phases
                .iter()
                .zip(&self.offsets)
                .map(|(t, d)| t + theta * d),
        )
    }
}

/// Per-scene data for evaluating baseline weights quickly: element gains
/// toward both points for both arrays.
struct ArrayGains {
    tx_user: Vec<Complex64>,
    tx_target: Vec<Complex64>,
    rx_user: Vec<Complex64>,
    rx_target: Vec<Complex64>,
}

impl ArrayGains {
    fn new(tx: &PinchingLayout, rx: &PinchingLayout, scene: &Scene, cfg: &SystemConfig) -> Result<Self> {
        Ok(Self {
            tx_user: element_gains(tx, &scene.user, cfg)?,
            tx_target: element_gains(tx, &scene.target, cfg)?,
            rx_user: element_gains(rx, &scene.user, cfg)?,
            rx_target: element_gains(rx, &scene.target, cfg)?,
        })
    }
}

pub fn baseline_design(
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
    link: Link,
) -> Result<DesignSolution> {
    let tx_layout = baseline_layout(WaveguideRole::Transmit, cfg.n_tx, cfg);
    let rx_layout = baseline_layout(WaveguideRole::Receive, cfg.n_rx, cfg);
    let gains = ArrayGains::new(&tx_layout, &rx_layout, scene, cfg)?;
    let tx_family = BlendedWeights::new(&tx_layout, &scene.user, &scene.target, cfg)?;
    let rx_family = BlendedWeights::new(&rx_layout, &scene.user, &scene.target, cfg)?;
    let resolution = cfg.grid_resolution;

    let (tx_theta, rx_theta, powers, q, metrics) = match link {
        Link::Downlink => {
            // The echo is only useful at the target, so the receive array
            // matches the target outright.
            let rx_w = rx_family.at(0.0);
            let rx_target_sq = weighted_sum(rx_w.as_slice(), &gains.rx_target).norm_sqr();
            let power = cfg.p_max;
            let report = |theta: f64| {
                let tx_w = tx_family.at(theta);
                let user_sq = weighted_sum(tx_w.as_slice(), &gains.tx_user).norm_sqr();
                let target_sq = weighted_sum(tx_w.as_slice(), &gains.tx_target).norm_sqr();
                let se = snr_rate(user_sq, power, cfg.noise_user);
                let smi = smi_bound_from_gain(target_sq * rx_target_sq, power, cfg.noise_rx_dl, cfg);
                MetricReport::new(se, smi, weights)
            };
            let (theta, _) = maximize_scalar(|t| report(t).weighted, 0.0, 1.0, resolution);
            (theta, 0.0, Powers::Downlink { transmit: power }, None, report(theta))
        }
        Link::Uplink => {
            // Transmission only serves sensing, so the transmit array matches
            // the target outright.
            let tx_w = tx_family.at(0.0);
            let tx_target_sq = weighted_sum(tx_w.as_slice(), &gains.tx_target).norm_sqr();
            let q_max = tx_target_sq * cfg.p_s_max;
            let solve = |theta: f64| {
                let rx_w = rx_family.at(theta);
                let user_sq = weighted_sum(rx_w.as_slice(), &gains.rx_user).norm_sqr();
                let target_sq = weighted_sum(rx_w.as_slice(), &gains.rx_target).norm_sqr();
                let q = q_star(user_sq, target_sq, q_max, weights, cfg);
                (q, user_sq, target_sq)
            };
            let (theta, _) = maximize_scalar(
                |t| {
                    let (q, u, g) = solve(t);
                    tilde_s_ul(q.q_star, u, g, weights, cfg)
                },
                0.0,
                1.0,
                resolution,
            );
            let (q, user_sq, target_sq) = solve(theta);
            let p_s = if q.q_star <= 0.0 || tx_target_sq == 0.0 {
                0.0
            } else if q.q_star >= q_max {
                cfg.p_s_max
            } else {
                q.q_star / tx_target_sq
            };
            let cascade_sq = tx_target_sq * target_sq;
            let se = ul_rate_from_gains(user_sq, cascade_sq, cfg.p_c_max, p_s, cfg);
            let smi = smi_bound_from_gain(cascade_sq, p_s, cfg.noise_rx_ul, cfg);
            (
                0.0,
                theta,
                Powers::Uplink {
                    communication: cfg.p_c_max,
                    sensing: p_s,
                },
                Some(q),
                MetricReport::new(se, smi, weights),
            )
        }
    };

    Ok(DesignSolution {
        link,
        method: Method::Baseline,
        tx_weights: Some(tx_family.at(tx_theta)),
        rx_weights: Some(rx_family.at(rx_theta)),
        tx_layout,
        rx_layout,
        powers,
        metrics,
        diagnostics: Diagnostics::Baseline {
            tx_theta,
            rx_theta,
            q,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::downlink::design_downlink;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg() -> SystemConfig {
        SystemConfig::default()
    }

    fn scene(xu: f64, yu: f64, xt: f64, yt: f64) -> Scene {
        Scene::new(Vec3::new(xu, yu, 0.0), Vec3::new(xt, yt, 0.0))
    }

    #[test]
    fn layout_examples() {
        let cfg = cfg();
        let lambda = cfg.wavelength();
        assert_eq!(baseline_layout(WaveguideRole::Transmit, 1, &cfg).locations, vec![0.0]);
        let two = baseline_layout(WaveguideRole::Transmit, 2, &cfg);
        assert!((two.locations[0] + lambda / 4.0).abs() < 1e-15);
        assert!((two.locations[1] - lambda / 4.0).abs() < 1e-15);
        let twenty = baseline_layout(WaveguideRole::Receive, 20, &cfg);
        let span = twenty.locations[19] - twenty.locations[0];
        assert!((span - 19.0 * lambda / 2.0).abs() < 1e-12);
        assert!((span - 0.1018).abs() < 1e-4);
        assert!(twenty.is_feasible(&cfg));
    }

    #[test]
    fn weights_must_be_unit_modulus() {
        assert!(AnalogWeights::new(vec![Complex64::new(0.6, 0.8)]).is_ok());
        assert!(AnalogWeights::new(vec![Complex64::new(0.5, 0.0)]).is_err());
        let json = serde_json::to_string(&AnalogWeights::uniform(2)).unwrap();
        assert!(serde_json::from_str::<AnalogWeights>(&json).is_ok());
        assert!(serde_json::from_str::<AnalogWeights>("[[2.0, 0.0]]").is_err());
    }

    #[test]
    fn single_element_unit_weight() {
        let cfg = cfg().with_elements(1, 1);
        let layout = baseline_layout(WaveguideRole::Transmit, 1, &cfg);
        let u = Vec3::new(1.0, -2.0, 0.0);
        let got = beamform_gain(&layout, &AnalogWeights::uniform(1), &u, &cfg).unwrap();
        assert_eq!(got, element_gain(WaveguideRole::Transmit, 0.0, &u, &cfg).unwrap());
    }

    #[test]
    fn conjugate_match_sums_magnitudes_and_bounds_random_weights() {
        let cfg = cfg();
        let layout = baseline_layout(WaveguideRole::Receive, cfg.n_rx, &cfg);
        let u = Vec3::new(6.0, -3.0, 0.0);
        let matched = beamform_gain(&layout, &phase_match(&layout, &u, &cfg).unwrap(), &u, &cfg)
            .unwrap()
            .norm();
        let magnitudes: f64 = element_gains(&layout, &u, &cfg).unwrap().iter().map(|g| g.norm()).sum();
        assert!((matched - magnitudes).abs() <= 1e-12 * magnitudes);

        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let w = AnalogWeights::from_phases((0..cfg.n_rx).map(|_| rng.random_range(-PI..PI)));
            assert!(beamform_gain(&layout, &w, &u, &cfg).unwrap().norm() <= matched * (1.0 + 1e-12));
        }
    }

    #[test]
    fn blend_endpoints_are_conjugate_matches() {
        let cfg = cfg();
        let layout = baseline_layout(WaveguideRole::Transmit, cfg.n_tx, &cfg);
        let (u, t) = (Vec3::new(-4.0, 1.0, 0.0), Vec3::new(9.0, -2.0, 0.0));
        let family = BlendedWeights::new(&layout, &u, &t, &cfg).unwrap();
        for (theta, point) in [(0.0, t), (1.0, u)] {
            let a = beamform_gain(&layout, &family.at(theta), &point, &cfg).unwrap().norm();
            let b = beamform_gain(&layout, &phase_match(&layout, &point, &cfg).unwrap(), &point, &cfg)
                .unwrap()
                .norm();
            assert!((a - b).abs() <= 1e-12 * b);
        }
    }

    #[test]
    fn single_objective_weights_pick_pure_matches() {
        let cfg = cfg();
        let s = scene(-4.0, 1.0, 9.0, -2.0);
        let comm = baseline_design(&s, &IsacWeights::new(1.0, 0.0).unwrap(), &cfg, Link::Downlink).unwrap();
        let sens = baseline_design(&s, &IsacWeights::new(0.0, 1.0).unwrap(), &cfg, Link::Downlink).unwrap();
        let theta = |d: &DesignSolution| match d.diagnostics {
            Diagnostics::Baseline { tx_theta, .. } => tx_theta,
            _ => unreachable!(),
        };
        assert_eq!(theta(&comm), 1.0);
        assert_eq!(theta(&sens), 0.0);
    }

    #[test]
    fn pass_beats_baseline_on_a_large_region() {
        let cfg = cfg();
        let s = scene(-6.0, 2.5, 7.0, -3.0);
        let weights = IsacWeights::new(0.5, 0.5).unwrap();
        for d_x in [20.0, 40.0] {
            let cfg = cfg.clone().with_side_length(d_x);
            let pass = design_downlink(&s, &weights, &cfg).unwrap();
            let base = baseline_design(&s, &weights, &cfg, Link::Downlink).unwrap();
            assert!(base.metrics.weighted < pass.metrics.weighted);
        }
    }

    #[test]
    fn layout_is_scene_independent() {
        let cfg = cfg();
        let w = IsacWeights::new(0.3, 0.7).unwrap();
        let a = baseline_design(&scene(1.0, 1.0, -3.0, 2.0), &w, &cfg, Link::Uplink).unwrap();
        let b = baseline_design(&scene(-9.0, -2.0, 13.0, -1.0), &w, &cfg, Link::Uplink).unwrap();
        assert_eq!(a.tx_layout, b.tx_layout);
        assert_eq!(a.rx_layout, b.rx_layout);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn blended_gain_never_exceeds_conjugate_match(
            theta in 0.0..=1.0f64,
            ux in -20.0..20.0f64, uy in -4.0..4.0f64,
            tx in -20.0..20.0f64, ty in -4.0..4.0f64,
            px in -20.0..20.0f64, py in -4.0..4.0f64,
        ) {
            let cfg = cfg();
            let layout = baseline_layout(WaveguideRole::Transmit, cfg.n_tx, &cfg);
            let family = BlendedWeights::new(&layout, &Vec3::new(ux, uy, 0.0), &Vec3::new(tx, ty, 0.0), &cfg).unwrap();
            let w = family.at(theta);
            prop_assert!(w.as_slice().iter().all(|c| (c.norm() - 1.0).abs() <= UNIT_TOLERANCE));
            let p = Vec3::new(px, py, 0.0);
            let got = beamform_gain(&layout, &w, &p, &cfg).unwrap().norm();
            let best = beamform_gain(&layout, &phase_match(&layout, &p, &cfg).unwrap(), &p, &cfg).unwrap().norm();
            prop_assert!(got <= best * (1.0 + 1e-12));
        }

        #[test]
        fn uplink_baseline_is_valid(
            ux in -20.0..20.0f64, uy in -4.0..4.0f64,
            tx in -20.0..20.0f64, ty in -4.0..4.0f64,
            a in 0.0..=1.0f64,
        ) {
            let mut cfg = cfg().with_elements(10, 10);
            cfg.grid_resolution = 501;
            let w = IsacWeights::from_communication_share(a).unwrap();
            let d = baseline_design(&scene(ux, uy, tx, ty), &w, &cfg, Link::Uplink).unwrap();
            prop_assert!(d.metrics.is_valid());
            let p_s = d.powers.sensing().unwrap();
            prop_assert!((0.0..=cfg.p_s_max).contains(&p_s));
        }
    }
}
