//! Monte Carlo checks of the convergence, survival, rate and escape results,
//! and the network lower-bound certificate.

pub mod appendix;
pub mod bounds;
pub mod chung;
pub mod ensemble;
pub mod escape;
pub mod rates;

pub use appendix::{certify_a1_bound, A1Report};
pub use bounds::{
    cauchy_tail_bound, check_geometric_decay, empirical_quantile, path_length_coefficient, path_length_quantile,
    survival_bound, survival_bound_raw, DecayReport, PathLengthReport,
};
pub use chung::{chung_recursion, ChungResult};
pub use ensemble::{
    checkpoints, for_each_run, run_ensemble, run_ensemble_with, write_per_run_csv, write_per_step_csv, EnsembleSpec,
    EnsembleStats, RunSummary, StepStats, Theory,
};
pub use escape::{escape_experiment, EscapeStats};
pub use rates::{fit_algebraic_rate, lemma_constant, RateFit, RATE_SLACK};
