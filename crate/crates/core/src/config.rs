//! Physical and algorithmic constants for one simulation run.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::WaveguideRole;

/// Free-space propagation speed used throughout (m/s).
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0) / 1000.0
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * (watts * 1000.0).log10()
}

/// Pitch used when packing a cluster of pinching elements around a mass center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ClusterSpacing {
    /// Smallest multiple of the guided wavelength `λ / i_ref` that is at least
    /// the minimum spacing. Neighbouring elements are fed in phase.
    Guided,
    /// Free-space wavelength `λ`.
    Wavelength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// Carrier frequency (Hz).
    pub carrier_frequency: f64,
    /// Effective refractive index of the dielectric waveguides.
    pub refractive_index: f64,
    /// Amplitude scale of a single element. `None` means `λ / 4π`.
    pub element_amplitude: Option<f64>,
    /// Waveguide height above the ground plane (m).
    pub altitude: f64,
    /// y-coordinate of the receive waveguide (m); the transmit one sits at y = 0.
    pub waveguide_offset: f64,
    pub tx_length: f64,
    pub rx_length: f64,
    /// Side of the service rectangle along y (m).
    pub region_width: f64,
    pub target_altitude: f64,
    pub min_spacing: f64,
    pub frame_length: u32,
    pub rcs_variance: f64,
    pub noise_user: f64,
    pub noise_rx_dl: f64,
    pub noise_rx_ul: f64,
    pub p_max: f64,
    pub p_c_max: f64,
    pub p_s_max: f64,
    pub grid_resolution: usize,
    pub n_tx: usize,
    pub n_rx: usize,
    pub cluster_spacing: ClusterSpacing,
    pub bcd_tolerance: f64,
    pub bcd_max_iterations: usize,
}

impl Default for SystemConfig {
    fn default() -> Self {
        let carrier_frequency = 28e9;
        let wavelength = SPEED_OF_LIGHT / carrier_frequency;
        Self {
            carrier_frequency,
            refractive_index: 1.4,
            element_amplitude: None,
            altitude: 3.0,
            waveguide_offset: 4.0,
            tx_length: 40.0,
            rx_length: 40.0,
            region_width: 8.0,
            target_altitude: 0.0,
            min_spacing: wavelength / 2.0,
            frame_length: 5,
            rcs_variance: 10.0,
            noise_user: dbm_to_watts(-114.0),
            noise_rx_dl: dbm_to_watts(-114.0),
            noise_rx_ul: dbm_to_watts(-114.0),
            p_max: dbm_to_watts(10.0),
            p_c_max: dbm_to_watts(5.0),
            p_s_max: dbm_to_watts(5.0),
            grid_resolution: 10_000,
            n_tx: 20,
            n_rx: 20,
            cluster_spacing: ClusterSpacing::Guided,
            bcd_tolerance: 1e-6,
            bcd_max_iterations: 20,
        }
    }
}

impl SystemConfig {
    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.carrier_frequency
    }

    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.wavelength()
    }

    pub fn beta(&self) -> f64 {
        self.element_amplitude
            .unwrap_or_else(|| self.wavelength() / (4.0 * PI))
    }

    pub fn guided_wavelength(&self) -> f64 {
        self.wavelength() / self.refractive_index
    }

    /// Distance between neighbouring elements of a template cluster.
    pub fn cluster_pitch(&self) -> f64 {
        match self.cluster_spacing {
            ClusterSpacing::Wavelength => self.wavelength(),
            ClusterSpacing::Guided => {
                let guided = self.guided_wavelength();
                let multiple = (self.min_spacing / guided - 1e-9).ceil().max(1.0);
                multiple * guided
            }
        }
    }

    pub fn waveguide_length(&self, role: WaveguideRole) -> f64 {
        match role {
            WaveguideRole::Transmit => self.tx_length,
            WaveguideRole::Receive => self.rx_length,
        }
    }

    /// Waveguides are centred on the origin: `[-L/2, L/2]`.
    pub fn span(&self, role: WaveguideRole) -> (f64, f64) {
        let half = self.waveguide_length(role) / 2.0;
        (-half, half)
    }

    pub fn element_count(&self, role: WaveguideRole) -> usize {
        match role {
            WaveguideRole::Transmit => self.n_tx,
            WaveguideRole::Receive => self.n_rx,
        }
    }

    pub fn waveguide_y(&self, role: WaveguideRole) -> f64 {
        match role {
            WaveguideRole::Transmit => 0.0,
            WaveguideRole::Receive => self.waveguide_offset,
        }
    }

    /// Sets both waveguide lengths and the x-side of the service region.
    pub fn with_side_length(mut self, side_length: f64) -> Self {
        self.tx_length = side_length;
        self.rx_length = side_length;
        self
    }

    pub fn with_elements(mut self, n_tx: usize, n_rx: usize) -> Self {
        self.n_tx = n_tx;
        self.n_rx = n_rx;
        self
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &'static str, reason: impl Into<String>) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig {
                    field,
                    reason: reason.into(),
                })
            }
        }
        let finite_positive = |v: f64| v.is_finite() && v > 0.0;
        let finite_nonneg = |v: f64| v.is_finite() && v >= 0.0;

        check(
            finite_positive(self.carrier_frequency),
            "carrier_frequency",
            "must be positive",
        )?;
        check(
            finite_positive(self.refractive_index),
            "refractive_index",
            "must be positive",
        )?;
        if let Some(beta) = self.element_amplitude {
            check(finite_nonneg(beta), "element_amplitude", "must be >= 0")?;
        }
        check(finite_nonneg(self.altitude), "altitude", "must be >= 0")?;
        check(
            self.waveguide_offset.is_finite(),
            "waveguide_offset",
            "must be finite",
        )?;
        check(finite_positive(self.tx_length), "tx_length", "must be positive")?;
        check(finite_positive(self.rx_length), "rx_length", "must be positive")?;
        check(
            finite_nonneg(self.region_width),
            "region_width",
            "must be >= 0",
        )?;
        check(
            self.target_altitude.is_finite(),
            "target_altitude",
            "must be finite",
        )?;
        check(
            finite_positive(self.min_spacing),
            "min_spacing",
            "must be positive",
        )?;
        check(
            self.min_spacing <= self.wavelength() * (1.0 + 1e-12),
            "min_spacing",
            format!(
                "must not exceed the wavelength ({:.6e} m > {:.6e} m)",
                self.min_spacing,
                self.wavelength()
            ),
        )?;
        check(self.frame_length >= 1, "frame_length", "must be >= 1")?;
        check(
            finite_nonneg(self.rcs_variance),
            "rcs_variance",
            "must be >= 0",
        )?;
        check(finite_positive(self.noise_user), "noise_user", "must be positive")?;
        check(
            finite_positive(self.noise_rx_dl),
            "noise_rx_dl",
            "must be positive",
        )?;
        check(
            finite_positive(self.noise_rx_ul),
            "noise_rx_ul",
            "must be positive",
        )?;
        check(finite_nonneg(self.p_max), "p_max", "must be >= 0")?;
        check(finite_nonneg(self.p_c_max), "p_c_max", "must be >= 0")?;
        check(finite_nonneg(self.p_s_max), "p_s_max", "must be >= 0")?;
        check(self.grid_resolution >= 2, "grid_resolution", "must be >= 2")?;
        check(self.n_tx >= 1, "n_tx", "must be >= 1")?;
        check(self.n_rx >= 1, "n_rx", "must be >= 1")?;
        check(
            finite_positive(self.bcd_tolerance),
            "bcd_tolerance",
            "must be positive",
        )?;
        check(
            self.bcd_max_iterations >= 1,
            "bcd_max_iterations",
            "must be >= 1",
        )?;
        for role in [WaveguideRole::Transmit, WaveguideRole::Receive] {
            let count = self.element_count(role);
            let required = (count as f64 - 1.0) * self.min_spacing;
            if required > self.waveguide_length(role) {
                return Err(Error::WaveguideTooShort {
                    role,
                    count,
                    required,
                    length: self.waveguide_length(role),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derived_constants_at_28_ghz() {
        let cfg = SystemConfig::default();
        assert!((cfg.wavelength() - 0.010_714_285_714).abs() < 1e-12);
        assert!((cfg.wavenumber() - 586.4306).abs() < 1e-4);
        assert!((cfg.beta() - 8.5261e-4).abs() < 1e-8);
    }

    #[test]
    fn dbm_conversion() {
        assert!((dbm_to_watts(-114.0) - 3.981e-15).abs() < 1e-18);
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(5.0)) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn guided_pitch_is_smallest_multiple_above_min_spacing() {
        let mut cfg = SystemConfig::default();
        assert!((cfg.cluster_pitch() - cfg.wavelength() / 1.4).abs() < 1e-15);
        cfg.min_spacing = cfg.wavelength();
        assert!((cfg.cluster_pitch() - 2.0 * cfg.wavelength() / 1.4).abs() < 1e-15);
        cfg.cluster_spacing = ClusterSpacing::Wavelength;
        assert_eq!(cfg.cluster_pitch(), cfg.wavelength());
    }

    #[test]
    fn rejects_spacing_above_wavelength() {
        let mut cfg = SystemConfig::default();
        cfg.min_spacing = 2.0 * cfg.wavelength();
        match cfg.validate() {
            Err(Error::InvalidConfig { field, .. }) => assert_eq!(field, "min_spacing"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defaults_validate() {
        SystemConfig::default().validate().unwrap();
    }
}
