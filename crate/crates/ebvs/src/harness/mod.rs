//! Simulation harness: configuration, motion plans, open- and closed-loop
//! runs, bound sweeps, and CSV reporting.

pub mod bounds;
pub mod closed_loop;
pub mod config;
pub mod csv_out;
pub mod excitation;
pub mod open_loop;

pub use bounds::{run_bounds, BoundSweep};
pub use closed_loop::{run_closed_loop, ClosedLoopResult, ClosedLoopSummary};
pub use config::{ConfigFile, SimSetup};
pub use excitation::ExcitationPlan;
pub use open_loop::{run_calibration, CalibrationOutcome};
