//! Paired fine-versus-coarse experiments, sweeps and result files.

mod aggregate;
mod persist;
mod run;
mod spec;
mod sweep;

pub use aggregate::{
    aggregate, batch_size_for, mean, quantile_sorted, standard_error, AggregateMode, Summary,
};
pub use persist::{
    csv_columns, format_g9, load_archive, parse_csv, persist, read_csv, render_csv, save_archive,
    sweep_table, CsvRow, CsvTable, CSV_VERSION,
};
pub use run::{run_comparison, Registries, RunPoint, RunRecord};
pub use spec::{ExperimentSpec, GroupingRef, SourceSpec, SweepAxis, DATA_DIR_ENV};
pub use sweep::{
    prepare_data, replicate_seed, split_bundle, sweep, sweep_points, AggregatedPoint,
    PointProgress, PointResult, PreparedData, ReplicateOutcome, SweepPoint, SweepResult,
    TrainSource,
};
