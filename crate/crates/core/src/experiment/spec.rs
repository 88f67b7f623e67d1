use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::{dbm_to_watts, ClusterSpacing, SystemConfig};
use crate::design::{Link, Method};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SweepSidelength,
    SweepElements,
    RateRegion,
    Validate,
    Single,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::SweepSidelength => "sweep-sidelength",
            ExperimentKind::SweepElements => "sweep-elements",
            ExperimentKind::RateRegion => "rate-region",
            ExperimentKind::Validate => "validate",
            ExperimentKind::Single => "single",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ExperimentKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        [
            ExperimentKind::SweepSidelength,
            ExperimentKind::SweepElements,
            ExperimentKind::RateRegion,
            ExperimentKind::Validate,
            ExperimentKind::Single,
        ]
        .into_iter()
        .find(|k| k.as_str() == s)
        .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub kind: ExperimentKind,
    pub side_lengths: Vec<f64>,
    /// Elements per waveguide; each entry sets `N = M`.
    pub element_counts: Vec<usize>,
    /// Communication weights `α_w`; sensing gets `1 - α_w`.
    pub weights: Vec<f64>,
    pub drops: usize,
    pub seed: u64,
    pub output: PathBuf,
    pub link: Link,
    pub methods: Vec<Method>,
    /// Keep records already present in the output directory.
    pub resume: bool,
}

/// One sweep point. Scenes are shared by all points with the same
/// `side_index`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub index: usize,
    pub side_index: usize,
    pub side_length: f64,
    pub n_tx: usize,
    pub n_rx: usize,
    pub weight: f64,
}

pub const DEFAULT_DROPS: usize = 200;
pub const DEFAULT_SEED: u64 = 2025;

impl ExperimentSpec {
    /// Defaults for each experiment, taken from the reference sweeps where one
    /// exists and from `cfg` otherwise.
    pub fn for_kind(kind: ExperimentKind, cfg: &SystemConfig) -> Self {
        let here = (vec![cfg.tx_length], vec![cfg.n_tx]);
        let (side_lengths, element_counts, weights, link) = match kind {
            ExperimentKind::SweepSidelength => (
                vec![10.0, 20.0, 30.0, 40.0, 50.0],
                vec![20],
                vec![0.0, 0.5, 1.0],
                Link::Downlink,
            ),
            ExperimentKind::SweepElements => (
                here.0,
                vec![4, 8, 12, 16, 20],
                vec![0.0, 0.5, 1.0],
                Link::Downlink,
            ),
            ExperimentKind::RateRegion => (
                vec![40.0],
                vec![10],
                (0..=10).map(|i| i as f64 / 10.0).collect(),
                Link::Uplink,
            ),
            ExperimentKind::Validate | ExperimentKind::Single => {
                (here.0, here.1, vec![0.5], Link::Downlink)
            }
        };
        Self {
            kind,
            side_lengths,
            element_counts,
            weights,
            drops: DEFAULT_DROPS,
            seed: DEFAULT_SEED,
            output: PathBuf::from("out"),
            link,
            methods: vec![Method::Pass, Method::Baseline],
            resume: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        fn check(ok: bool, field: &'static str, reason: &str) -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidSpec {
                    field,
                    reason: reason.to_owned(),
                })
            }
        }
        check(self.drops >= 1, "drops", "must be >= 1")?;
        check(!self.side_lengths.is_empty(), "side_lengths", "must not be empty")?;
        check(
            self.side_lengths.iter().all(|d| d.is_finite() && *d > 0.0),
            "side_lengths",
            "must be positive",
        )?;
        check(!self.element_counts.is_empty(), "element_counts", "must not be empty")?;
        check(
            self.element_counts.iter().all(|&n| n >= 1),
            "element_counts",
            "must be >= 1",
        )?;
        check(!self.weights.is_empty(), "weights", "must not be empty")?;
        check(
            self.weights.iter().all(|w| (0.0..=1.0).contains(w)),
            "weights",
            "must lie in [0, 1]",
        )?;
        check(!self.methods.is_empty(), "methods", "must not be empty")?;
        Ok(())
    }

    /// Cartesian product in (side length, element count, weight) order.
    pub fn points(&self) -> Vec<SweepPoint> {
        let mut points = Vec::new();
        for (side_index, &side_length) in self.side_lengths.iter().enumerate() {
            for &n in &self.element_counts {
                for &weight in &self.weights {
                    points.push(SweepPoint {
                        index: points.len(),
                        side_index,
                        side_length,
                        n_tx: n,
                        n_rx: n,
                        weight,
                    });
                }
            }
        }
        points
    }
}

/// Flat key-value config file. Every key is optional; power and noise keys
/// are in dBm.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    carrier_frequency_hz: Option<f64>,
    refractive_index: Option<f64>,
    element_amplitude: Option<f64>,
    altitude_m: Option<f64>,
    waveguide_offset_m: Option<f64>,
    side_length_m: Option<f64>,
    tx_length_m: Option<f64>,
    rx_length_m: Option<f64>,
    region_width_m: Option<f64>,
    target_altitude_m: Option<f64>,
    min_spacing_m: Option<f64>,
    frame_length: Option<u32>,
    rcs_variance: Option<f64>,
    noise_dbm: Option<f64>,
    noise_user_dbm: Option<f64>,
    noise_rx_dl_dbm: Option<f64>,
    noise_rx_ul_dbm: Option<f64>,
    p_max_dbm: Option<f64>,
    p_c_max_dbm: Option<f64>,
    p_s_max_dbm: Option<f64>,
    grid_resolution: Option<usize>,
    elements: Option<usize>,
    n_tx: Option<usize>,
    n_rx: Option<usize>,
    cluster_spacing: Option<ClusterSpacing>,
    bcd_tolerance: Option<f64>,
    bcd_max_iterations: Option<usize>,

    experiment: Option<ExperimentKind>,
    side_lengths: Option<Vec<f64>>,
    element_counts: Option<Vec<usize>>,
    weights: Option<Vec<f64>>,
    drops: Option<usize>,
    seed: Option<u64>,
    link: Option<Link>,
    methods: Option<Vec<Method>>,
    out: Option<PathBuf>,
}

impl ConfigFile {
    fn system(&self) -> SystemConfig {
        let mut cfg = SystemConfig::default();
        let set = |slot: &mut f64, value: Option<f64>| {
            if let Some(v) = value {
                *slot = v;
            }
        };
        set(&mut cfg.carrier_frequency, self.carrier_frequency_hz);
        cfg.min_spacing = self.min_spacing_m.unwrap_or(cfg.wavelength() / 2.0);
        set(&mut cfg.refractive_index, self.refractive_index);
        cfg.element_amplitude = self.element_amplitude.or(cfg.element_amplitude);
        set(&mut cfg.altitude, self.altitude_m);
        set(&mut cfg.waveguide_offset, self.waveguide_offset_m);
        set(&mut cfg.tx_length, self.side_length_m);
        set(&mut cfg.rx_length, self.side_length_m);
        set(&mut cfg.tx_length, self.tx_length_m);
        set(&mut cfg.rx_length, self.rx_length_m);
        set(&mut cfg.region_width, self.region_width_m);
        set(&mut cfg.target_altitude, self.target_altitude_m);
        set(&mut cfg.rcs_variance, self.rcs_variance);
        let dbm = |v: Option<f64>| v.map(dbm_to_watts);
        set(&mut cfg.noise_user, dbm(self.noise_dbm));
        set(&mut cfg.noise_rx_dl, dbm(self.noise_dbm));
        set(&mut cfg.noise_rx_ul, dbm(self.noise_dbm));
        set(&mut cfg.noise_user, dbm(self.noise_user_dbm));
        set(&mut cfg.noise_rx_dl, dbm(self.noise_rx_dl_dbm));
        set(&mut cfg.noise_rx_ul, dbm(self.noise_rx_ul_dbm));
        set(&mut cfg.p_max, dbm(self.p_max_dbm));
        set(&mut cfg.p_c_max, dbm(self.p_c_max_dbm));
        set(&mut cfg.p_s_max, dbm(self.p_s_max_dbm));
        set(&mut cfg.bcd_tolerance, self.bcd_tolerance);
        if let Some(t) = self.frame_length {
            cfg.frame_length = t;
        }
        if let Some(r) = self.grid_resolution {
            cfg.grid_resolution = r;
        }
        if let Some(n) = self.elements {
            cfg = cfg.with_elements(n, n);
        }
        cfg.n_tx = self.n_tx.unwrap_or(cfg.n_tx);
        cfg.n_rx = self.n_rx.unwrap_or(cfg.n_rx);
        if let Some(s) = self.cluster_spacing {
            cfg.cluster_spacing = s;
        }
        if let Some(i) = self.bcd_max_iterations {
            cfg.bcd_max_iterations = i;
        }
        cfg
    }

    fn spec(&self, cfg: &SystemConfig, kind: Option<ExperimentKind>) -> ExperimentSpec {
        let kind = kind.or(self.experiment).unwrap_or(ExperimentKind::Single);
        let mut spec = ExperimentSpec::for_kind(kind, cfg);
        if let Some(v) = &self.side_lengths {
            spec.side_lengths = v.clone();
        }
        if let Some(v) = &self.element_counts {
            spec.element_counts = v.clone();
        }
        if let Some(v) = &self.weights {
            spec.weights = v.clone();
        }
        if let Some(v) = &self.methods {
            spec.methods = v.clone();
        }
        if let Some(v) = &self.out {
            spec.output = v.clone();
        }
        spec.drops = self.drops.unwrap_or(spec.drops);
        spec.seed = self.seed.unwrap_or(spec.seed);
        spec.link = self.link.unwrap_or(spec.link);
        spec
    }
}

/// Parses a config file body. An empty string yields the default system.
pub fn load_config_str(text: &str) -> Result<(SystemConfig, ExperimentSpec)> {
    load_config_str_as(text, None)
}

/// Like [`load_config_str`], but `kind` replaces the file's `experiment`
/// key; the file's sweep lists still override that kind's defaults.
pub fn load_config_str_as(
    text: &str,
    kind: Option<ExperimentKind>,
) -> Result<(SystemConfig, ExperimentSpec)> {
    let file: ConfigFile = toml::from_str(text)?;
    let cfg = file.system();
    cfg.validate()?;
    let spec = file.spec(&cfg, kind);
    spec.validate()?;
    Ok((cfg, spec))
}

pub fn load_config(path: &Path) -> Result<(SystemConfig, ExperimentSpec)> {
    load_config_str(&std::fs::read_to_string(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let (cfg, spec) = load_config_str("").unwrap();
        assert_eq!(cfg, SystemConfig::default());
        assert_eq!(spec.kind, ExperimentKind::Single);
        assert_eq!(spec.drops, DEFAULT_DROPS);
    }

    #[test]
    fn dbm_keys_are_converted() {
        let (cfg, _) = load_config_str("noise_dbm = -114\np_max_dbm = 20").unwrap();
        assert!((cfg.noise_user - 3.981e-15).abs() < 1e-18);
        assert!((cfg.noise_rx_ul - 3.981e-15).abs() < 1e-18);
        assert!((cfg.p_max - 0.1).abs() < 1e-15);
    }

    #[test]
    fn overrides_apply() {
        let text = r#"
            side_length_m = 25
            elements = 6
            n_rx = 4
            cluster_spacing = "wavelength"
            experiment = "rate-region"
            weights = [0.0, 0.25, 0.5, 0.75, 1.0]
            drops = 3
            seed = 9
            link = "dl"
            methods = ["pass"]
            out = "results"
        "#;
        let (cfg, spec) = load_config_str(text).unwrap();
        assert_eq!((cfg.tx_length, cfg.rx_length), (25.0, 25.0));
        assert_eq!((cfg.n_tx, cfg.n_rx), (6, 4));
        assert_eq!(cfg.cluster_spacing, ClusterSpacing::Wavelength);
        assert_eq!(spec.kind, ExperimentKind::RateRegion);
        assert_eq!(spec.weights.len(), 5);
        assert_eq!((spec.drops, spec.seed), (3, 9));
        assert_eq!(spec.link, Link::Downlink);
        assert_eq!(spec.methods, vec![Method::Pass]);
        assert_eq!(spec.output, PathBuf::from("results"));
    }

    #[test]
    fn explicit_kind_keeps_file_lists() {
        let text = "experiment = \"single\"\nweights = [0.2]";
        let (_, spec) = load_config_str_as(text, Some(ExperimentKind::RateRegion)).unwrap();
        assert_eq!(spec.kind, ExperimentKind::RateRegion);
        assert_eq!(spec.weights, vec![0.2]);
        assert_eq!(spec.side_lengths, vec![40.0]);
    }

    #[test]
    fn carrier_change_moves_default_spacing() {
        let (cfg, _) = load_config_str("carrier_frequency_hz = 3e10").unwrap();
        assert!((cfg.min_spacing - 0.005).abs() < 1e-15);
    }

    #[test]
    fn oversized_spacing_names_the_field() {
        let err = load_config_str("min_spacing_m = 0.02").unwrap_err();
        assert!(matches!(err, Error::InvalidConfig { field: "min_spacing", .. }), "{err}");
    }

    #[test]
    fn unknown_key_is_rejected() {
        let err = load_config_str("carrier = 28e9").unwrap_err().to_string();
        assert!(err.contains("carrier"), "{err}");
    }

    #[test]
    fn invalid_spec_names_the_field() {
        let err = load_config_str("weights = [1.5]").unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { field: "weights", .. }));
        let err = load_config_str("drops = 0").unwrap_err();
        assert!(matches!(err, Error::InvalidSpec { field: "drops", .. }));
    }

    #[test]
    fn points_share_scenes_per_side_length() {
        let mut spec = ExperimentSpec::for_kind(ExperimentKind::SweepSidelength, &SystemConfig::default());
        spec.side_lengths = vec![10.0, 20.0];
        let points = spec.points();
        assert_eq!(points.len(), 6);
        assert_eq!(points[4].side_index, 1);
        assert_eq!(points[4].weight, 0.5);
        assert!(points.iter().enumerate().all(|(i, p)| p.index == i));
    }
}
