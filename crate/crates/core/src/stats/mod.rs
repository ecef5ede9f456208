//! Variance decomposition of grid results and the special functions behind
//! its p-values.

mod friedman;
mod linear;
pub mod special;

pub use friedman::{friedman_test, mid_ranks, FriedmanResult};
pub use linear::{
    anova_sequential, fit_ols, AnovaReport, Experiment, Factor, FactorAnova, FactorSpec, OlsFit,
};
pub use special::{
    chisq_upper_tail, f_upper_tail, ln_gamma, reg_inc_beta, reg_inc_gamma_lower,
    reg_inc_gamma_upper,
};
