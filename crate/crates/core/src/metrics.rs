//! Spectral efficiency and sensing mutual information (SMI) bounds.
//!
//! All rates are in nats; use [`to_bits`] for reporting.

use std::f64::consts::LN_2;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::SystemConfig;
use crate::design::Link;
use crate::error::{Error, Result};
use crate::geometry::{aggregate_gain, cascade_gain, PinchingLayout, Scene};

pub fn to_bits(nats: f64) -> f64 {
    nats / LN_2
}

/// Scalarization weights for communication and sensing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IsacWeights {
    pub communication: f64,
    pub sensing: f64,
}

impl IsacWeights {
    pub fn new(communication: f64, sensing: f64) -> Result<Self> {
        let ok = |w: f64| w.is_finite() && w >= 0.0;
        if !ok(communication) || !ok(sensing) || communication + sensing <= 0.0 {
            return Err(Error::InvalidSpec {
                field: "weights",
                reason: format!(
                    "need non-negative weights with a positive sum, got ({communication}, {sensing})"
                ),
            });
        }
        Ok(Self {
            communication,
            sensing,
        })
    }

    /// `(α_w, 1 - α_w)`, the weighting used by the sweep experiments.
    pub fn from_communication_share(share: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&share) {
            return Err(Error::InvalidSpec {
                field: "weights",
                reason: format!("communication share {share} outside [0, 1]"),
            });
        }
        Self::new(share, 1.0 - share)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            communication: self.communication * factor,
            sensing: self.sensing * factor,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub spectral_efficiency: f64,
    pub smi_bound: f64,
    pub weighted: f64,
}

impl MetricReport {
    pub fn new(spectral_efficiency: f64, smi_bound: f64, weights: &IsacWeights) -> Self {
        Self {
            spectral_efficiency,
            smi_bound,
            weighted: weighted_objective(spectral_efficiency, smi_bound, weights),
        }
    }

    pub fn is_valid(&self) -> bool {
        [self.spectral_efficiency, self.smi_bound, self.weighted]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

pub fn weighted_objective(spectral_efficiency: f64, smi: f64, weights: &IsacWeights) -> f64 {
    // 0 · x must stay 0 even when the unused metric is huge.
    let term = |w: f64, v: f64| if w == 0.0 { 0.0 } else { w * v };
    term(weights.communication, spectral_efficiency) + term(weights.sensing, smi)
}

/// `ln(1 + gain² · P / σ²)`.
pub fn snr_rate(gain_sq: f64, power: f64, noise: f64) -> f64 {
    (gain_sq * power / noise).ln_1p()
}

/// `(1/T) ln(1 + ρ² |G|² ‖x‖² / σ²)` for a given waveform energy `‖x‖²`.
pub fn smi_for_energy(cascade_sq: f64, energy: f64, noise: f64, cfg: &SystemConfig) -> f64 {
    (cfg.rcs_variance * cascade_sq * energy / noise).ln_1p() / cfg.frame_length as f64
}

/// Jensen bound: energy replaced by its mean `T · P`.
pub fn smi_bound_from_gain(cascade_sq: f64, power: f64, noise: f64, cfg: &SystemConfig) -> f64 {
    smi_for_energy(cascade_sq, cfg.frame_length as f64 * power, noise, cfg)
}

/// Uplink SINR rate with the sensing echo treated as noise.
pub fn ul_rate_from_gains(
    rx_user_sq: f64,
    cascade_sq: f64,
    p_c: f64,
    p_s: f64,
    cfg: &SystemConfig,
) -> f64 {
    let interference = cfg.rcs_variance * cascade_sq * p_s + cfg.noise_rx_ul;
    (rx_user_sq * p_c / interference).ln_1p()
}

pub fn dl_spectral_efficiency(
    l_tx: &PinchingLayout,
    power: f64,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<f64> {
    let g = aggregate_gain(l_tx, &scene.user, cfg)?.norm_sqr();
    Ok(snr_rate(g, power, cfg.noise_user))
}

pub fn dl_smi_bound(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    power: f64,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<f64> {
    let g = cascade_gain(l_tx, l_rx, &scene.target, cfg)?.norm_sqr();
    Ok(smi_bound_from_gain(g, power, cfg.noise_rx_dl, cfg))
}

pub fn ul_spectral_efficiency(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    p_c: f64,
    p_s: f64,
    scene: &Scene,
    cfg: &SystemConfig,
) -> Result<f64> {
    let user = aggregate_gain(l_rx, &scene.user, cfg)?.norm_sqr();
    let echo = cascade_gain(l_tx, l_rx, &scene.target, cfg)?.norm_sqr();
    Ok(ul_rate_from_gains(user, echo, p_c, p_s, cfg))
}

pub fn ul_smi_bound(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    p_s: f64,
    cfg: &SystemConfig,
    scene: &Scene,
) -> Result<f64> {
    let g = cascade_gain(l_tx, l_rx, &scene.target, cfg)?.norm_sqr();
    Ok(smi_bound_from_gain(g, p_s, cfg.noise_rx_ul, cfg))
}

/// Distribution of the `T`-sample sensing waveform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WaveformLaw {
    /// i.i.d. circularly-symmetric complex Gaussian samples of power `P`.
    GaussianIid,
    /// Every sample has modulus `√P`, so `‖x‖² = T·P` deterministically.
    ConstantModulus,
}

impl WaveformLaw {
    pub fn sample_energy<R: Rng + ?Sized>(&self, rng: &mut R, frame_length: u32, power: f64) -> f64 {
        match self {
            WaveformLaw::ConstantModulus => frame_length as f64 * power,
            WaveformLaw::GaussianIid => {
                // Each complex sample has variance P split across I and Q.
                let half = power / 2.0;
                (0..2 * frame_length)
                    .map(|_| {
                        let v: f64 = StandardNormal.sample(rng);
                        half * v * v
                    })
                    .sum()
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmiEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub bound: f64,
    pub draws: usize,
}

impl SmiEstimate {
    pub fn jensen_gap(&self) -> f64 {
        self.bound - self.mean
    }
}

/// Monte-Carlo estimate of the exact SMI `(1/T) E{ln(1 + ρ²|G|²‖x‖²/σ²)}`.
#[allow(clippy::too_many_arguments)]
pub fn mc_smi_estimate<R: Rng + ?Sized>(
    l_tx: &PinchingLayout,
    l_rx: &PinchingLayout,
    power: f64,
    link: Link,
    cfg: &SystemConfig,
    scene: &Scene,
    law: WaveformLaw,
    n_draws: usize,
    rng: &mut R,
) -> Result<SmiEstimate> {
    let cascade_sq = cascade_gain(l_tx, l_rx, &scene.target, cfg)?.norm_sqr();
    Ok(smi_estimate_from_gain(cascade_sq, power, link, cfg, law, n_draws, rng))
}

pub fn smi_estimate_from_gain<R: Rng + ?Sized>(
    cascade_sq: f64,
    power: f64,
    link: Link,
    cfg: &SystemConfig,
    law: WaveformLaw,
    n_draws: usize,
    rng: &mut R,
) -> SmiEstimate {
    let noise = match link {
        Link::Downlink => cfg.noise_rx_dl,
        Link::Uplink => cfg.noise_rx_ul,
    };
    let n_draws = n_draws.max(1);
    // Welford keeps the variance exact when every draw is identical.
    let (mut mean, mut m2) = (0.0f64, 0.0f64);
    for k in 1..=n_draws {
        let energy = law.sample_energy(rng, cfg.frame_length, power);
        let value = smi_for_energy(cascade_sq, energy, noise, cfg);
        let delta = value - mean;
        mean += delta / k as f64;
        m2 += delta * (value - mean);
    }
    let std_error = if n_draws > 1 {
        (m2 / (n_draws as f64 - 1.0) / n_draws as f64).sqrt()
    } else {
        0.0
    };
    SmiEstimate {
        mean,
        std_error,
        bound: smi_bound_from_gain(cascade_sq, power, noise, cfg),
        draws: n_draws,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Vec3, WaveguideRole};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn scene() -> Scene {
        Scene::new(Vec3::new(0.0, 0.0, 0.0), Vec3::new(1.5, 2.0, 0.0))
    }

    fn tx(locs: Vec<f64>) -> PinchingLayout {
        PinchingLayout::new(WaveguideRole::Transmit, locs)
    }

    fn rx(locs: Vec<f64>) -> PinchingLayout {
        PinchingLayout::new(WaveguideRole::Receive, locs)
    }

    #[test]
    fn downlink_se_examples() {
        let cfg = SystemConfig::default().with_elements(1, 1);
        let s = scene();
        assert_eq!(dl_spectral_efficiency(&tx(vec![0.0]), 0.0, &s, &cfg).unwrap(), 0.0);
        let g = aggregate_gain(&tx(vec![0.0]), &s.user, &cfg).unwrap().norm_sqr();
        let p = cfg.noise_user / g;
        let se = dl_spectral_efficiency(&tx(vec![0.0]), p, &s, &cfg).unwrap();
        assert!((se - 2f64.ln()).abs() < 1e-12);

        // Single element straight above the user, 10 dBm.
        let snr = cfg.p_max * cfg.beta().powi(2) / (9.0 * cfg.noise_user);
        let se = dl_spectral_efficiency(&tx(vec![0.0]), cfg.p_max, &s, &cfg).unwrap();
        assert!((se - snr.ln_1p()).abs() < 1e-12);
        assert!((snr - 2.0291e5).abs() / 2.0291e5 < 1e-3, "{snr}");
    }

    #[test]
    fn smi_bound_examples() {
        let mut cfg = SystemConfig::default();
        let s = scene();
        let (t, r) = (tx(vec![1.5]), rx(vec![1.5]));
        assert_eq!(dl_smi_bound(&t, &r, 0.0, &s, &cfg).unwrap(), 0.0);
        assert_eq!(ul_smi_bound(&t, &r, 0.0, &cfg, &s).unwrap(), 0.0);

        let g = cascade_gain(&t, &r, &s.target, &cfg).unwrap().norm_sqr();
        let frame = cfg.frame_length as f64;
        // ρ² T P |G|² / σ² = e - 1  →  1 / T
        let p = (std::f64::consts::E - 1.0) * cfg.noise_rx_dl / (cfg.rcs_variance * frame * g);
        let v = dl_smi_bound(&t, &r, p, &s, &cfg).unwrap();
        assert!((v - 1.0 / frame).abs() < 1e-12);

        cfg.frame_length = 1;
        let v = dl_smi_bound(&t, &r, 1e-3, &s, &cfg).unwrap();
        let expected = (cfg.rcs_variance * 1e-3 * g / cfg.noise_rx_dl).ln_1p();
        assert!((v - expected).abs() < 1e-12);
    }

    #[test]
    fn uplink_se_examples() {
        let cfg = SystemConfig::default();
        let s = scene();
        let (t, r) = (tx(vec![1.5, 1.6]), rx(vec![0.0, 1.5]));
        assert_eq!(ul_spectral_efficiency(&t, &r, 0.0, 1e-3, &s, &cfg).unwrap(), 0.0);
        let g = aggregate_gain(&r, &s.user, &cfg).unwrap().norm_sqr();
        let free = ul_spectral_efficiency(&t, &r, 1e-3, 0.0, &s, &cfg).unwrap();
        assert!((free - snr_rate(g, 1e-3, cfg.noise_rx_ul)).abs() < 1e-12);
        let one = ul_spectral_efficiency(&t, &r, 1e-3, 1e-3, &s, &cfg).unwrap();
        let two = ul_spectral_efficiency(&t, &r, 1e-3, 2e-3, &s, &cfg).unwrap();
        assert!(two < one && one < free);
    }

    #[test]
    fn weighted_examples() {
        let w = |a, b| IsacWeights::new(a, b).unwrap();
        assert_eq!(weighted_objective(2.0, 4.0, &w(1.0, 0.0)), 2.0);
        assert_eq!(weighted_objective(2.0, 4.0, &w(0.0, 1.0)), 4.0);
        assert_eq!(weighted_objective(2.0, 4.0, &w(0.5, 0.5)), 3.0);
        assert!(IsacWeights::new(0.0, 0.0).is_err());
        assert!(IsacWeights::new(-1.0, 2.0).is_err());
    }

    #[test]
    fn constant_modulus_estimate_equals_bound() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let est = smi_estimate_from_gain(
            1e-12, 1e-2, Link::Downlink, &cfg, WaveformLaw::ConstantModulus, 1000, &mut rng,
        );
        assert_eq!(est.mean, est.bound);
        assert_eq!(est.std_error, 0.0);
    }

    #[test]
    fn gaussian_estimate_sits_below_bound() {
        let cfg = SystemConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let est = smi_estimate_from_gain(
            1e-12, 1e-2, Link::Downlink, &cfg, WaveformLaw::GaussianIid, 20_000, &mut rng,
        );
        assert!(est.mean <= est.bound + 3.0 * est.std_error);
        assert!(est.jensen_gap() > 0.0);
        let zero = smi_estimate_from_gain(
            1e-12, 0.0, Link::Downlink, &cfg, WaveformLaw::GaussianIid, 100, &mut rng,
        );
        assert_eq!((zero.mean, zero.bound), (0.0, 0.0));
    }

    #[test]
    fn gaussian_energy_has_mean_tp() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 200_000;
        let mean: f64 = (0..n)
            .map(|_| WaveformLaw::GaussianIid.sample_energy(&mut rng, 5, 2.0))
            .sum::<f64>()
            / n as f64;
        // Var(‖x‖²) = T P² = 20; standard error ≈ 0.01.
        assert!((mean - 10.0).abs() < 0.05, "{mean}");
    }

    proptest! {
        #[test]
        fn metrics_are_monotone(g in 1e-14..1e-6f64, p in 0.0..1.0f64, dp in 0.0..1.0f64) {
            let cfg = SystemConfig::default();
            prop_assert!(snr_rate(g, p + dp, cfg.noise_user) >= snr_rate(g, p, cfg.noise_user));
            prop_assert!(snr_rate(g * 2.0, p, cfg.noise_user) >= snr_rate(g, p, cfg.noise_user));
            let s = |pw| smi_bound_from_gain(g, pw, cfg.noise_rx_dl, &cfg);
            prop_assert!(s(p + dp) >= s(p));
            let ul = |pc, ps| ul_rate_from_gains(g, g * g, pc, ps, &cfg);
            prop_assert!(ul(p + dp, 0.1) >= ul(p, 0.1));
            prop_assert!(ul(0.1, p + dp) <= ul(0.1, p));
        }

        #[test]
        fn dl_and_ul_bounds_coincide(lt in -3.0..3.0f64, lr in -3.0..3.0f64, p in 0.0..1.0f64) {
            let mut cfg = SystemConfig::default();
            cfg.noise_rx_ul = cfg.noise_rx_dl;
            let s = scene();
            let (t, r) = (tx(vec![lt]), rx(vec![lr]));
            prop_assert_eq!(
                dl_smi_bound(&t, &r, p, &s, &cfg).unwrap(),
                ul_smi_bound(&t, &r, p, &cfg, &s).unwrap()
            );
        }

        #[test]
        fn weighted_is_linear(se in 0.0..20.0f64, smi in 0.0..5.0f64, a in 0.0..1.0f64, k in 0.1..10.0f64) {
            let w = IsacWeights::new(a, 1.0 - a + 1e-3).unwrap();
            let base = weighted_objective(se, smi, &w);
            prop_assert!((weighted_objective(k * se, k * smi, &w) - k * base).abs() < 1e-9 * (1.0 + base * k));
        }
    }
}
