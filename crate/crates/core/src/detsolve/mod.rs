//! Ansatz-driven solver for the symmetry condition.
//!
//! Substituting `Qᵢ = Σ F_k(n)·b_k(x[n], y[n])` turns the symmetry condition into linear
//! recurrences for the unknown sequences `F_k`. Collocation at random continuous points
//! recovers those recurrences numerically, and a global null space over the index window
//! gives the solution space.

mod ansatz;
mod closed_form;
mod collocation;
pub mod linalg;
mod recurrence;
mod space;

pub use ansatz::{parse_ansatz_file, AnsatzBasis, GRAM_CONDITION_LIMIT};
pub use closed_form::match_closed_form;
pub use collocation::{
    build_collocation, collocate, default_samples, unknown, ConstraintBlock, LinearResidual,
    RecurrenceConstraints, MIN_WINDOW, SHIFTS,
};
pub use recurrence::{relation_from_exprs, solve_recurrence, RecurrenceRelation, SequenceTable};
pub(crate) use space::{clean_blocks, column_table};
pub use space::{
    membership_residual, solve_constraints, solve_space, symmetries, NullSpace, SpaceElement,
    SymmetrySpace, VERIFY_TOL,
};

use crate::expr::EvalError;
use crate::slsc::SlscError;
use crate::FormatError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DetError {
    #[error("invalid ansatz: {0}")]
    BadAnsatz(String),
    #[error("residual is not linear in the unknown coefficients: {0}")]
    NotLinear(String),
    #[error("no admissible sample point at n = {n}")]
    Sampling { n: i64 },
    #[error("{0}")]
    InvalidConfig(String),
    #[error("rank did not stabilise over the window (ranks {ranks:?}, nullities {nullities:?})")]
    RankUnstable {
        ranks: Vec<(i64, usize)>,
        nullities: Vec<(i64, usize)>,
    },
    #[error("leading coefficient block is singular at n = {n}")]
    SingularLeading { n: i64 },
    #[error("basis element {name} fails the symmetry condition (residual {residual:.3e})")]
    Verification { name: String, residual: f64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Slsc(#[from] SlscError),
}
