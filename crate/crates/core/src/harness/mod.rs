//! Experiment orchestration: configuration, per-seed runs with logs,
//! manifests and checkpoints, cached normalization bounds, aggregation
//! and reports.

mod aggregate;
mod config;
mod context;
mod report;
mod run;

pub use aggregate::{aggregate, collect_runs, read_log, CellResult, RunLog};
pub use config::{merge_overrides, DatasetSection, ExperimentConfig, ExperimentSection};
pub use context::{
    default_dataset_path, env_config, find_topology, load_or_generate_dataset, prepare_task, test_set, BoundsCache, TaskContext,
    TopologyRef, TrainingSet,
};
pub use report::{plot_rows, write_report, PlotRow, ReportFormat, ResultsDocument, RESULTS_FORMAT, RESULTS_VERSION};
pub use run::{
    evaluate_policy, rerun_manifest, run_dir, run_experiment, run_one, CheckpointMeta, LogRow, Manifest, PolicyEvaluation,
    RunStatus, RunSummary, CHECKPOINT_FILE, MANIFEST_FORMAT, MANIFEST_VERSION,
};
