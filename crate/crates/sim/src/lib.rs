//! Scenario runner, overhead accounting, experiments and attack probes for
//! [`treevault`].
//!
//! - [`run_scenario`] drives a deployment through a seeded event mix.
//! - [`effectiveness_experiment`] compares extirpation-based and common key
//!   groups over tree shapes.
//! - [`fp_experiment`] measures filter false positives against prediction.
//! - [`security_probes`] runs the eavesdropper, insider and collusion attacks.

pub mod config;
pub mod effectiveness;
pub mod error;
pub mod fp;
pub mod metrics;
pub mod output;
pub mod probes;
pub mod scenario;
pub mod shape;

pub use config::{BloomConfig, EventMix, ScenarioConfig};
pub use effectiveness::{effectiveness_experiment, EffectivenessReport, RatioSample, RequestMix};
pub use error::{Result, SimError};
pub use fp::{fp_experiment, FpRow};
pub use metrics::{overhead_report, OverheadModel, OverheadRow};
pub use probes::{security_probes, ProbeReport, ProbeResult};
pub use scenario::{run_scenario, ScenarioOutput};
pub use shape::Shape;
