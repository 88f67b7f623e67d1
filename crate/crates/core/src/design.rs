use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::baseline::AnalogWeights;
use crate::downlink::{PartitionResult, SafetyNet};
use crate::geometry::PinchingLayout;
use crate::metrics::MetricReport;
use crate::uplink::{BcdTrace, QSolution};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Link {
    #[serde(rename = "dl")]
    Downlink,
    #[serde(rename = "ul")]
    Uplink,
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Link::Downlink => "dl",
            Link::Uplink => "ul",
        })
    }
}

impl FromStr for Link {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dl" | "downlink" => Ok(Link::Downlink),
            "ul" | "uplink" => Ok(Link::Uplink),
            other => Err(format!("unknown link `{other}` (expected dl or ul)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pass,
    Baseline,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pass => "pass",
            Method::Baseline => "baseline",
        })
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "pass" => Ok(Method::Pass),
            "baseline" => Ok(Method::Baseline),
            other => Err(format!("unknown method `{other}` (expected pass or baseline)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "link", rename_all = "lowercase")]
pub enum Powers {
    Downlink { transmit: f64 },
    Uplink { communication: f64, sensing: f64 },
}

impl Powers {
    pub fn sensing(&self) -> Option<f64> {
        match self {
            Powers::Uplink { sensing, .. } => Some(*sensing),
            Powers::Downlink { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Diagnostics {
    PassDownlink {
        partition: PartitionResult,
        safety_net: SafetyNet,
    },
    PassUplink {
        q: QSolution,
        /// `None` when the best iterate is the uniform initial receive layout.
        alpha_star: Option<f64>,
        n_user: Option<usize>,
        trace: BcdTrace,
    },
    Baseline {
        tx_theta: f64,
        rx_theta: f64,
        q: Option<QSolution>,
    },
}

/// Layouts, powers and exact-channel metrics of one design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub link: Link,
    pub method: Method,
    pub tx_layout: PinchingLayout,
    pub rx_layout: PinchingLayout,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tx_weights: Option<AnalogWeights>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rx_weights: Option<AnalogWeights>,
    pub powers: Powers,
    pub metrics: MetricReport,
    pub diagnostics: Diagnostics,
}

impl DesignSolution {
    pub fn bcd_iterations(&self) -> Option<usize> {
        match &self.diagnostics {
            Diagnostics::PassUplink { trace, .. } => Some(trace.iterations),
            _ => None,
        }
    }
}
