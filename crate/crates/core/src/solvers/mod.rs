//! Bound state solvers: the constant state and its threshold, descent,
//! mountain pass, Newton refinement and parameter continuation.

pub mod continuation;
pub mod flow;
pub mod mountain;
pub mod newton;
pub mod state;
pub mod threshold;
pub mod trace;

pub use continuation::{continuation, ContinuationConfig, ContinuationTrace, Parameter, Schedule, TraceEntry};
pub use flow::{build_bump, flow_iterate, normalized_gradient_flow, Bump, FlowConfig, FlowOutcome};
pub use mountain::{mountain_pass, MountainPassConfig, MountainPassResult};
pub use newton::{newton_refine, newton_solve, NewtonConfig, NewtonOutcome};
pub use state::{constant_state, verify_solution, BoundState, Check, Origin, Residuals, VerifyReport};
pub use threshold::{mass_threshold, mass_threshold_on, Threshold};
pub use trace::{read_trace_dir, write_trace_dir, TraceRecord};
