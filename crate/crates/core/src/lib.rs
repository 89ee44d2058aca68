//! Mixed-integer mean-risk portfolio optimization.
//!
//! Solves `max r'y - h(sqrt(y'My))` subject to `a'y <= b`, `y >= 0` and
//! integrality of `y_i` for `i` in `I`, by depth-first branch-and-bound
//! whose node relaxations are solved by a non-monotone away-step
//! Frank-Wolfe method on the capped simplex.

// negated comparisons also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bnb;
pub mod error;
pub mod fw;
pub mod generate;
pub mod harness;
pub mod io;
pub mod model;
pub mod oracle;
pub mod projection;
