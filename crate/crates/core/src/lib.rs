//! Coordinated dynamic spectrum sharing between a terrestrial network (TN)
//! and a LEO satellite network (NTN).
//!
//! A central spectrum management server splits each coordinated frequency
//! group into a TN range, a guard band, and an NTN range, and moves the
//! boundary one group at a time according to TN load. The crate simulates
//! that loop over a simplified radio and traffic model.

pub mod band;
pub mod config;
pub mod engine;
pub mod error;
pub mod metrics;
pub mod radio;
pub mod rng;
pub mod sms;
pub mod topology;
pub mod traffic;

pub use config::{parse_scenario, Case, ScenarioConfig};
pub use engine::{run_campaign, run_simulation, CampaignResult, RunSpec};
pub use error::{Error, Result};
pub use metrics::{compute_cdf, CdfSeries, MetricsStore, RunSummary};
