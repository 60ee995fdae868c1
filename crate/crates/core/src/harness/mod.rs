//! Monte-Carlo rate studies, moment suites, inequality checks and reports.
//!
//! Every study draws one noise path per path index from `(seed, index)` and
//! evaluates all levels on it, so level errors are coupled. Paths run in
//! parallel; aggregation is ordered by path index, which makes reports
//! reproducible byte for byte.

mod config;
mod fit;
mod inequalities;
mod moments;
mod report;
mod study;

pub use config::{InitialData, StudyConfig};
pub use fit::{fit_rate, RateFit};
pub use inequalities::{besov_inequality_suite, random_band_limited, InequalityRow, STABILITY_FACTOR};
pub use moments::{
    chaos_block_check, moment_suite, moment_suite_with_constant, ChaosBlockRow, MomentRow, MomentTable, Z_THRESHOLD,
};
pub use study::{
    run_linear_rate_study, run_nonlinear_rate_study, run_nonlinear_rate_study_with, LevelStat, PathRecord,
    RateReport, Series, VERSION,
};
