//! Configuration-driven experiment runner, decay-curve fitting and export.

mod config;
mod curve;
mod run;

pub use config::{
    Coeff, ExperimentConfig, ExperimentSpec, FlowKind, GraphSpec, LiouvillianCheck, ModelSpec, ObservableSpec,
};
pub use curve::{fit_exponential, Abscissa, DecayCurve, ExpFit, DEFAULT_FLOOR, FLOW_FLOOR};
pub use run::{
    default_stem, execute, exit_code, random_hermitian, render_csv, run, Outcome, Row, RunOptions, RunOutput, Summary,
    Verdict,
};
