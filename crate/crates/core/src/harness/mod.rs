//! Cross-validated experiments: baselines, reconstruction, ablations, reports.

mod bank;
mod cv;
mod manifest;
mod report;
mod sweep;

pub use bank::{sequence_flows, FlowBank, FoldMembers, PairFlows, SequenceFlows};
pub use cv::{
    ablation_settings, evaluate_baselines, evaluate_reconstruction, mean_of, run_ablation, run_baselines,
    run_reconstruction_cv, train_fold_classifier, train_fold_classifiers, train_fold_reconstructor, AblationAxis, AblationRow, AblationTable, CVReport, FoldResult,
};
pub use manifest::{ExperimentManifest, FoldSettings, SCHEMA_VERSION};
pub use report::{emit_ablation, emit_report, read_folds_csv};
pub use sweep::{run_size_sweep, write_sweep_csv, SweepRow};
