//! Mollifiers, the dyadic ε ladder and the mollification certificate.

mod profile;
mod induction;
mod rho;
mod schedule;
mod select;
mod sigma;

pub use profile::{MollifierTable, DEFAULT_RESOLUTION, HAT_RANGE};
pub(crate) use profile::angle_limit;
pub use schedule::{beta_for, build_schedule, compute_lambda, lambda_for, lambda_from_ratio, LambdaChoice, MollSchedule, EPS_FLOOR};
pub use induction::{hypothesis_terms, lemma_ind_bound, LemmaReport};
pub use sigma::{sigma_decomposition, SigmaDecomp};
pub use select::{bound_terms, select_epsilon, CandidateRecord, Certificate, Selection};
pub use rho::{build_rho, measured_dinf, mollified_fourier, rho_energy, rho_grid, GridDensity, MeasuredTransport};
