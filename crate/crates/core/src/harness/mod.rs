//! Scenario-driven episodes, metrics and paired baseline-vs-adaptive
//! comparisons.

mod comparison;
mod episode;
mod metrics;
pub mod presets;
mod scenario;

pub use comparison::*;
pub use episode::*;
pub use metrics::*;
pub use scenario::*;
