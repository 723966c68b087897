//! Lie point symmetries, reductions and first integrals for second-order systems of
//! difference equations in two unknowns.
//!
//! ```
//! use dsym_core::expr::parse;
//!
//! let w = parse("(x[n]*y[n+1] + 1)/(x[n] + y[n+1])").unwrap();
//! assert_eq!(w.to_string(), "(x[n]*y[n+1] + 1)/(x[n] + y[n+1])");
//! ```

pub mod detsolve;
pub mod conservation;
pub mod expr;
pub mod reduction;
pub mod slsc;
pub mod system;
mod text;

pub use text::FormatError;

// The guide's code blocks run as doctests.
#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/systems.md")]
    mod systems {}
    #[doc = include_str!("../../../book/src/symmetries.md")]
    mod symmetries {}
    #[doc = include_str!("../../../book/src/integrals.md")]
    mod integrals {}
    #[doc = include_str!("../../../book/src/reductions.md")]
    mod reductions {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
