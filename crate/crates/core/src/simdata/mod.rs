//! Simulation tasks with ground-truth densities, a synthetic outlier
//! benchmark, and CSV ingestion with min-max normalization.

mod csvio;
mod outlier;
mod tasks;

pub use csvio::{format_csv, parse_csv, read_csv, write_csv, CsvTable, NormStats, SplitSpec};
pub use outlier::{make_outlier_dataset, OutlierDataset};
pub use tasks::{
    log_density_indep_mixture, log_density_involute, log_density_mixture_1d, log_density_octagon,
    octagon_component, sample_indep_mixture, sample_involute, sample_octagon, SimTask,
    DEFAULT_QUAD_POINTS, MIXTURE_MEANS, MIXTURE_SD,
};
