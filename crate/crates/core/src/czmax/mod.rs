//! Dyadic maximal operators, the Calderón–Zygmund decomposition and
//! checkers for the inequalities built on them.

mod cz;
mod inequalities;
mod maximal;
mod selector;

pub use cz::{cz_decompose, cz_threshold, verify_cz, CzOutput, CzReport};
pub use inequalities::{
    fefferman_stein_check, fefferman_stein_constant, good_lambda_check, weak_11_check, FeffermanSteinReport,
    GoodLambdaReport, Weak11Case, Weak11Report,
};
pub use maximal::{hl_maximal, sharp_maximal};
pub use selector::{optimizing_selector, s_phi_eta, s_phi_eta_at, SelectorPair};

/// `‖M‖`: the weak (1,1) proof gives `μ({Mf > λ}) <= ‖f‖_1 / λ` with
/// constant one.
pub const MAXIMAL_WEAK_NORM: f64 = 1.0;
