//! Exact unconditional m-test for binomial and multinomial contingency
//! tables.
//!
//! The nuisance success probability is integrated out rather than
//! maximized (Barnard) or conditioned away (Fisher). Probabilities are
//! computed in log-space so large marginals do not underflow.

pub mod baselines;
pub mod enumerate;
pub mod error;
pub mod exactprob;
pub mod logfact;
pub mod montecarlo;
pub mod oracle;
pub mod sum;
pub mod table;

pub use enumerate::{
    count_tables, enumerate_tables, one_sided_pvalue, probability_grid, pvalue, two_sided_pvalue,
    GridRow, PValueOptions, PValueResult, Sided, TableCursor, TIE_TOLERANCE,
};
pub use error::{Error, Result};
pub use exactprob::{
    one_sided_base, one_sided_log_prob, one_sided_step_s1, one_sided_step_s2, two_sided_base,
    two_sided_log_prob, two_sided_step, LogProb,
};
pub use logfact::{log_binomial, LogFactorialTable};
pub use table::{MarginalSpec, TableCounts};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
