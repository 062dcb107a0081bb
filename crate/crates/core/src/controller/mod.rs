//! Escalation score, its fitting and calibration, the decision rule, threshold
//! sweeps, and the black-box adapter protocol.

mod decide;
mod fit;
mod isotonic;
mod score;
mod sweep;
mod wrap;

pub use decide::{decide, Decision, DecisionKind, DecisionReason};
pub use fit::{
    calibrate, choose_lambda, fit_weights, loss_and_grad, CalibrationDataset, FitError, LabeledRow,
    DEFAULT_LAMBDA, LAMBDA_GRID,
};
pub use isotonic::{fit_isotonic, IsotonicMap};
pub use score::{logistic, z_score, FitMeta, ScoreModel, Weights, ZMode};
pub use sweep::{
    replay, sweep_csv, sweep_tau, AttemptRecord, Replay, StageBRecord, SweepError, SweepRow,
    Trajectory, SWEEP_CSV_HEADER,
};
pub use wrap::{
    AdapterProtocolError, AdapterRequest, AdapterResponse, ProcessAdapter, ScriptedAdapter,
    StageAAdapter, ADAPTER_SCHEMA,
};

pub use crate::agents::run_wrapped as wrap_external;
