//! Dataset ingestion: canonical CSV files, gap imputation, and synthetic datasets.

mod csv_io;
mod impute;
mod manifest;
mod synthetic;

pub use csv_io::{load_dataset, read_dataset, save_dataset, LABEL_HEADER, SAMPLE_HEADER};
pub use impute::impute_missing;
pub use manifest::DatasetManifest;
pub use synthetic::{generate_synthetic, generate_synthetic_with_actions, ActionSpan, ActivityDef, SyntheticSpec};

/// Default longest gap, in seconds, filled by linear interpolation.
pub const DEFAULT_MAX_GAP_S: f64 = 1.0;
