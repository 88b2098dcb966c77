//! Evaluation harness: metrics, leave-one-subject-out runs and comparisons.

pub mod compare;
pub mod experiment;
pub mod metrics;

pub use compare::{compare_runs, ComparisonRow, ComparisonTable};
pub use experiment::{
    fit_final, fit_pipeline, fold_subjects, prepare, run_experiment, run_experiment_observed, run_grid, run_prepared,
    DataSource, ExperimentConfig, FitObserver, FitStage, FoldReport, GridCell, GridSpec, LeakGuard, MappingSettings,
    PipelineModel, PipelineSettings, PipelineStages, PreparedData, RunReport, UnlabeledPolicy, Variant,
    REPORT_FORMAT_VERSION,
};
pub use metrics::{accuracy, micro_f1, ClassMetrics, ConfusionMatrix};
