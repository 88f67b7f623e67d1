use thiserror::Error;

use crate::geometry::WaveguideRole;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular geometry: point coincides with the {role} element at x = {location} m")]
    SingularGeometry { role: WaveguideRole, location: f64 },

    #[error("empty {role} layout")]
    EmptyLayout { role: WaveguideRole },

    #[error("waveguide too short: {count} elements need {required:.6} m but the {role} span is {length:.6} m")]
    WaveguideTooShort {
        role: WaveguideRole,
        count: usize,
        required: f64,
        length: f64,
    },

    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    #[error("invalid experiment field `{field}`: {reason}")]
    InvalidSpec { field: &'static str, reason: String },

    #[error("instance too large for exhaustive search: {0}")]
    InstanceTooLarge(String),

    #[error("malformed records file: {0}")]
    MalformedRecords(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error("config parse error: {0}")]
    Toml(#[from] toml::de::Error),
}
