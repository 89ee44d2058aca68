use super::direction::Direction;
use super::state::IterateState;
use super::FwConfig;
use crate::error::{Error, Result};
use crate::model::SimplexProblem;

/// Backtracking steps allowed before the search is declared stalled.
pub const MAX_BACKTRACKS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub alpha: f64,
    /// Objective at the accepted point, from the cached update formulas.
    pub f_new: f64,
    /// `f_new - f(z)`.
    pub delta: f64,
    /// Reference value the step was accepted against.
    pub f_bar: f64,
    pub backtracks: usize,
}

/// Right-hand side `gamma1 alpha g'd - gamma2 alpha^2 ||d||^2` of the acceptance test.
#[inline]
pub fn sufficient_decrease(cfg: &FwConfig, dir: &Direction, alpha: f64) -> f64 {
    cfg.gamma1 * alpha * dir.slope - cfg.gamma2 * alpha * alpha * dir.norm_sq
}

/// Non-monotone Armijo backtracking starting from `alpha_max`.
///
/// Accepts the first `alpha = delta^j alpha_max` with
/// `f(z + alpha d) - f_bar <= gamma1 alpha g'd - gamma2 alpha^2 ||d||^2`,
/// where `f_bar` is the max over the recent objective history. The test is
/// evaluated as `(f_new - f) - (f_bar - f)` with both differences formed
/// from increments, so it stays meaningful when the decrease is far below
/// the resolution of `f` itself.
pub fn line_search(
    p: &SimplexProblem,
    st: &IterateState,
    dir: &Direction,
    cfg: &FwConfig,
) -> Result<StepOutcome> {
    let excess = st.f_bar_excess();
    let mut alpha = dir.alpha_max;
    for backtracks in 0..=MAX_BACKTRACKS {
        let delta = st.trial_delta(p, dir, alpha);
        if delta - excess <= sufficient_decrease(cfg, dir, alpha) {
            return Ok(StepOutcome {
                alpha,
                f_new: st.value() + delta,
                delta,
                f_bar: st.f_bar(),
                backtracks,
            });
        }
        alpha *= cfg.delta;
    }
    Err(Error::LineSearchStall(MAX_BACKTRACKS))
}
