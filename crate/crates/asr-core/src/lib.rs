//! Application-specific anycast routing: joint selection of a forwarding
//! path and a serving replica for every user, driven by a multiplicative
//! cost metric over path delay, energy, server load and bottleneck
//! bandwidth, with constraint perturbation analysis and a deterministic
//! tick-based simulator.

pub mod config;
pub mod netmodel;
pub mod optimizer;
pub mod posy;
pub mod sim;
pub mod telemetry;

pub use config::ConfigDocument;
pub use netmodel::{Link, NetworkGraph, NodeId, NodeRole, Path, PathMetrics};
pub use optimizer::{Assignment, ConstraintReport, SweepReport, UserDemand};
pub use posy::{GpInstance, Monomial, Posynomial, ValidationReport};
pub use sim::{SimConfig, SimStats, TraceEvent};
pub use telemetry::{DelayEstimator, EnergyLedger, QueueClass, ServerLoadModel};
