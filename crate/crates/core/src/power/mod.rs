//! Analytic energy model: compute, memory traffic and sensing power.

mod arch;
mod model;
pub mod profiles;

pub use arch::{count_macs, estimate_bytes, Architecture, Layer, BYTES_PER_VALUE};
pub use model::{
    power_mw, power_report, sensor_duty, ModelEntry, PowerBreakdown, PowerConstants, PowerProfile, PowerReport,
    ReportRow, Sensor, DEFAULT_INTERVAL_S,
};
