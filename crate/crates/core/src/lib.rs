//! Pinching-antenna ISAC simulator: exact channel model, communication and
//! sensing metrics, bi-partitioning designs for both link directions, a
//! fixed-array baseline, brute-force oracles and a Monte-Carlo harness.

pub mod baseline;
pub mod config;
pub mod design;
pub mod downlink;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod metrics;
pub mod oracle;
pub mod search;
pub mod uplink;

pub use config::{ClusterSpacing, SystemConfig};
pub use design::{DesignSolution, Diagnostics, Link, Method, Powers};
pub use error::{Error, Result};
pub use geometry::{PinchingLayout, Scene, Vec3, WaveguideRole};
pub use metrics::{IsacWeights, MetricReport};

/// Runs the selected design method for one scene.
pub fn design(
    method: Method,
    link: Link,
    scene: &Scene,
    weights: &IsacWeights,
    cfg: &SystemConfig,
) -> Result<DesignSolution> {
    match (method, link) {
        (Method::Pass, Link::Downlink) => downlink::design_downlink(scene, weights, cfg),
        (Method::Pass, Link::Uplink) => uplink::design_uplink(scene, weights, cfg),
        (Method::Baseline, link) => baseline::baseline_design(scene, weights, cfg, link),
    }
}
