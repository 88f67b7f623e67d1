//! Monte-Carlo sweeps over scenes, sizes and weights, with CSV output.

pub mod runner;
pub mod sampling;
pub mod spec;

pub use runner::{
    dominates_beyond_confidence, read_records, read_summary, run_experiment, strip_wall_time,
    ExperimentOutput, SummaryRow, SweepRecord,
};
pub use sampling::{drop_scene, sample_scene};
pub use spec::{
    load_config, load_config_str, load_config_str_as, ExperimentKind, ExperimentSpec, SweepPoint,
};
