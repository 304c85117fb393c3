//! Monte Carlo BER experiments: configuration, frame generation and the
//! per-receiver runner.

pub mod config;
pub mod runner;

pub use config::{
    ExperimentConfig, ReceiverKind, ReceiverSpec, ResolvedReceiver, Stopping, DEFAULT_CONFIG,
};
pub use runner::{
    run_frames, run_point, run_sweep, to_csv, to_json, Experiment, Frame, FrameOutcome,
    PointDiagnostics, PointResult, PreparedReceiver, SweepMetadata, SweepResult,
};
