//! Random-effects meta-analysis of aggregate data under generalized linear
//! mixed models.
//!
//! Study summaries (sizes, means, variances) are modelled with an
//! exponential-family outcome and a normal random intercept. The marginal
//! likelihood is integrated by quasi-Monte Carlo over a node set shared by
//! every study, maximized jointly in `(beta, tau^2)`, and inverted into
//! profile-likelihood intervals with an optional Bartlett-type correction.
//! Normal-normal baselines and a simulation harness sit alongside.
//!
//! ```
//! use metaglmm::{bundled, confidence_intervals, fit_mle, FitOptions, NodeSet};
//!
//! let data = bundled::long2020();
//! let nodes = NodeSet::sobol(256, 0).unwrap();
//! let fit = fit_mle(&data, &nodes, &FitOptions::default()).unwrap();
//! let (pl, plsbc) = confidence_intervals(&data, &nodes, &fit, 1, 0.95).unwrap();
//! assert!(plsbc.lower <= pl.lower && pl.upper <= plsbc.upper);
//! ```

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod family;
pub mod fit;
pub mod inference;
pub mod linalg;
pub mod nn_baseline;
pub mod optim;
pub mod qmc;
pub mod scalar;
pub mod sim;
pub mod special;

pub use data::{bundled, expand_two_arm, load_csv, plugin_dispersion, read_csv, write_csv, Dataset, Schema, Size, StudyRecord};
pub use error::{Error, Result};
pub use family::{FamilyKind, FamilySpec, Link};
pub use fit::{fit_constrained, fit_mle, total_loglik, ConstrainedFit, FitOptions, ModelFit, StartValues};
pub use inference::{
    bartlett_c, confidence_interval, confidence_intervals, corrected_lr, profile_lr, within_study_variances,
    BoundFlag, IntervalResult, Method,
};
pub use nn_baseline::{dl_estimate, log_or_bias_oracle, nn_input, nn_plbc_interval, wald_test, ContinuityPolicy, NNInput};
pub use qmc::{marginal_loglik_study, NodeSet};
pub use sim::{emit_results, run_scenario, ScenarioSpec, SimMethod, SimSummary};
