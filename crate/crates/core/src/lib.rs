//! Monte Carlo laboratory for the symmetrized and absorbed Euler schemes of
//! the log-Heston model: simulation, semi-analytic reference prices,
//! weak-error convergence studies, and numerical checks of the
//! negativity-probability bounds behind the convergence analysis.

pub mod engine;
pub mod error;
pub mod lemmas;
pub mod model;
pub mod quadrature;
pub mod reference;
pub mod rng;
pub mod scheme;

pub use engine::{
    estimate, estimate_many, fit_rate, run_studies, run_study, weak_error, ConvergenceStudy, EngineConfig,
    McEstimate, StudyReport,
};
pub use error::{Error, Result};
pub use model::{cir_mean, eval_payoff, feller, logprice_mean, GridSpec, HestonParams, ModelPreset, Payoff};
pub use reference::{price_call, price_digital, price_put, reference_for, reference_set, ReferencePrice};
pub use rng::{gaussian_pair, SeedSpec};
pub use scheme::{compute_z, simulate_terminal, step_logprice, step_variance, PathState, SchemeKind, ZValue};
