//! Desk-scale scaling studies built from the other modules, with
//! machine-readable reports.

mod report;
mod runs;
mod spec;

pub use report::{render_svg, Check, FitRecord, IdentityRow, MeanFieldRow, MollifyRow, PlotData, PotentialRow, Report, Rows, StabilityRow};
pub use runs::{make_config, mollify_config, mollify_setup, run, MollifyOutcome, MollifySetup, run_lemma_min, run_potential_accuracy, run_theorem1, run_theorem2, run_theorem3, CONSTANT_EPS};
pub use spec::{ConfigSource, ExperimentKind, ExperimentSpec};
