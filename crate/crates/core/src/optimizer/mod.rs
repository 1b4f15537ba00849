//! Trajectory optimization: collocation transcription, SQP backend and the
//! complete planning pipeline.

pub mod nlp;
pub mod pipeline;
pub mod sqp;
pub mod transcription;

pub use nlp::{NlpProblem, Triplets};
pub use pipeline::{payload_bounds, plan_pipeline, PlanOutcome, PlannerConfig, Scenario};
pub use sqp::{solve, SolveReport, SolveStatus, SqpOptions};
pub use transcription::{defects, node_constraints, objective, CraneNlp, PathSpec, Transcription};
