//! Simulator and policy engine for running containers under a carbon-emissions
//! target across a fleet of differently sized servers.

pub mod fixtures;
pub mod fleet;
pub mod metrics;
pub mod policy;
pub mod provider;
pub mod sim;
pub mod traces;

pub use fleet::{Fleet, Projection, ServerSpec};
pub use policy::{Action, ActionKind, ContainerConfig, ContainerState, PolicyInputs, QuotaMode, Status, Variant};
pub use traces::{CarbonTrace, WorkloadTrace};
