//! Away-step Frank-Wolfe with a non-monotone Armijo line search for the
//! node relaxations over the capped simplex.
//!
//! Each iteration computes the gradient from the cached `Qz`, picks the
//! toward or away direction, and backtracks using constant-time trial
//! evaluations. The toward-step slope doubles as the Frank-Wolfe gap, so
//! every iteration also yields the dual bound `f(z) + gap`, which the
//! branch-and-bound uses to stop a node early.

mod audit;
mod direction;
mod line_search;
mod origin;
mod state;

pub use audit::{TraceAudit, ACCEPTANCE_SLACK};
pub use direction::{away_step, choose_direction, toward_step, Direction, StepKind, Vertex, AWAY_STEP_CAP};
pub use line_search::{line_search, sufficient_decrease, StepOutcome, MAX_BACKTRACKS};
pub use origin::{origin_check, origin_optimality_check, point_better_than_origin, OriginCheck, OriginVerdict};
pub use state::IterateState;

use log::debug;
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::SimplexProblem;

/// Parameters of the Frank-Wolfe solver and its line search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FwConfig {
    /// Backtracking factor in (0, 1).
    pub delta: f64,
    /// Armijo slope factor in (0, 1/2).
    pub gamma1: f64,
    /// Quadratic safeguard factor, >= 0.
    pub gamma2: f64,
    /// Non-monotone memory; 0 gives the monotone line search.
    pub p_nm: usize,
    /// Away steps need a cap above this value.
    pub beta: f64,
    /// Stop once the Frank-Wolfe gap is at least `-gap_tol`.
    pub gap_tol: f64,
    pub max_iter: usize,
}

impl Default for FwConfig {
    fn default() -> Self {
        FwConfig {
            delta: 0.5,
            gamma1: 1e-4,
            gamma2: 1e-6,
            p_nm: 1,
            beta: 1e-6,
            gap_tol: 1e-10,
            max_iter: 50_000,
        }
    }
}

impl FwConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(what.to_string()));
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.gamma1 > 0.0 && self.gamma1 < 0.5) {
            return bad("gamma1 must lie in (0, 1/2)");
        }
        if !(self.gamma2 >= 0.0) {
            return bad("gamma2 must be nonnegative");
        }
        if !(self.beta > 0.0) {
            return bad("beta must be positive");
        }
        if !(self.gap_tol > 0.0) {
            return bad("gap_tol must be positive");
        }
        if self.max_iter == 0 {
            return bad("max_iter must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RelaxationStatus {
    Optimal,
    PrunedByBound,
    IterLimit,
    OriginOptimal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxationResult {
    pub z_star: DVector<f64>,
    pub f_star: f64,
    /// Best lower bound `max_k f(z^k) + gap_k` on the relaxation optimum.
    pub dual_bound: f64,
    pub status: RelaxationStatus,
    pub iters: usize,
    /// Frank-Wolfe gap at the last gradient evaluation.
    pub last_gap: f64,
}

/// One accepted line-search step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepRecord {
    pub kind: StepKind,
    pub alpha: f64,
    pub backtracks: usize,
    pub f_bar: f64,
    /// Accepted increment `f(z + alpha d) - f(z)`.
    pub delta: f64,
    /// Objective after the step from the incremental formulas.
    pub f_cached: f64,
    /// Objective after the step recomputed from scratch.
    pub f_scratch: f64,
    /// Acceptance right-hand side at the accepted alpha.
    pub rhs: f64,
}

/// Per-iteration data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterRecord {
    pub f: f64,
    pub f_bar: f64,
    pub gap: f64,
    pub dual: f64,
    pub step: Option<StepRecord>,
}

/// Optional instrumentation of a relaxation solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelaxationTrace {
    pub f_start: f64,
    pub records: Vec<IterRecord>,
    /// [`IterateState::cache_drift`] at termination.
    pub final_cache_drift: f64,
    pub stalled: bool,
}

impl RelaxationTrace {
    /// Dual bounds collected at every iteration.
    pub fn duals(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.dual)
    }

    pub fn steps(&self) -> impl Iterator<Item = &StepRecord> + '_ {
        self.records.iter().filter_map(|r| r.step.as_ref())
    }
}

/// Minimizes `p` over the capped simplex from `z0`.
///
/// Stops when the gap reaches `-gap_tol` (optimal), when the dual bound
/// reaches `prune_threshold` (pruned), or after `max_iter` iterations. A
/// stalled line search or an undefined gradient ends the run as an
/// iteration limit with the bound collected so far.
pub fn solve_relaxation(
    p: &SimplexProblem,
    z0: &DVector<f64>,
    prune_threshold: Option<f64>,
    cfg: &FwConfig,
) -> Result<RelaxationResult> {
    run(p, z0, prune_threshold, cfg, None)
}

/// Like [`solve_relaxation`], recording every iteration into `trace`.
pub fn solve_relaxation_traced(
    p: &SimplexProblem,
    z0: &DVector<f64>,
    prune_threshold: Option<f64>,
    cfg: &FwConfig,
    trace: &mut RelaxationTrace,
) -> Result<RelaxationResult> {
    run(p, z0, prune_threshold, cfg, Some(trace))
}

fn run(
    p: &SimplexProblem,
    z0: &DVector<f64>,
    prune_threshold: Option<f64>,
    cfg: &FwConfig,
    mut trace: Option<&mut RelaxationTrace>,
) -> Result<RelaxationResult> {
    let mut st = IterateState::new(p, &finite_start(p, z0), cfg.p_nm)?;
    if let Some(t) = trace.as_deref_mut() {
        t.f_start = st.value();
    }
    let mut dual_bound = f64::NEG_INFINITY;
    let mut last_gap = f64::NEG_INFINITY;

    let finish = |st: &IterateState,
                  status,
                  dual_bound: f64,
                  last_gap,
                  trace: Option<&mut RelaxationTrace>| {
        if let Some(t) = trace {
            t.final_cache_drift = st.cache_drift(p);
        }
        RelaxationResult {
            z_star: st.z().clone(),
            f_star: st.value(),
            dual_bound,
            status,
            iters: st.iteration(),
            last_gap,
        }
    };

    for _ in 0..cfg.max_iter {
        let g = match st.gradient(p) {
            Ok(g) => g,
            Err(Error::GradientUndefined) => {
                debug!("gradient undefined at iteration {}", st.iteration());
                return Ok(finish(&st, RelaxationStatus::IterLimit, dual_bound, last_gap, trace));
            }
            Err(e) => return Err(e),
        };
        if !st.value().is_finite() || g.iter().any(|v| !v.is_finite()) {
            debug!("objective or gradient overflowed at iteration {}", st.iteration());
            return Ok(finish(&st, RelaxationStatus::IterLimit, dual_bound, last_gap, trace));
        }
        let toward = toward_step(&st, &g);
        let gap = toward.slope;
        let dual = st.value() + gap;
        dual_bound = dual_bound.max(dual);
        last_gap = gap;

        let mut record = IterRecord {
            f: st.value(),
            f_bar: st.f_bar(),
            gap,
            dual,
            step: None,
        };

        if gap >= -cfg.gap_tol {
            if let Some(t) = trace.as_deref_mut() {
                t.records.push(record);
            }
            return Ok(finish(&st, RelaxationStatus::Optimal, dual_bound, last_gap, trace));
        }
        if prune_threshold.is_some_and(|thr| dual >= thr) {
            if let Some(t) = trace.as_deref_mut() {
                t.records.push(record);
            }
            return Ok(finish(&st, RelaxationStatus::PrunedByBound, dual_bound, last_gap, trace));
        }

        let away = away_step(&st, &g, cfg.beta);
        let dir = choose_direction(toward, away, cfg.beta);
        let outcome = match line_search(p, &st, &dir, cfg) {
            Ok(o) => o,
            Err(Error::LineSearchStall(_)) => {
                debug!("line search stalled at iteration {} (gap {gap:e})", st.iteration());
                if let Some(t) = trace.as_deref_mut() {
                    t.records.push(record);
                    t.stalled = true;
                }
                return Ok(finish(&st, RelaxationStatus::IterLimit, dual_bound, last_gap, trace));
            }
            Err(e) => return Err(e),
        };
        st.apply_step(p, &dir, outcome.alpha, outcome.delta);

        if let Some(t) = trace.as_deref_mut() {
            record.step = Some(StepRecord {
                kind: dir.kind,
                alpha: outcome.alpha,
                backtracks: outcome.backtracks,
                f_bar: outcome.f_bar,
                delta: outcome.delta,
                f_cached: st.value(),
                f_scratch: p.eval_f(st.z()),
                rhs: sufficient_decrease(cfg, &dir, outcome.alpha),
            });
            t.records.push(record);
        }
    }
    Ok(finish(&st, RelaxationStatus::IterLimit, dual_bound, last_gap, trace))
}

/// `z0` scaled toward the origin until the objective is finite. Scaling
/// keeps the point in the capped simplex.
fn finite_start(p: &SimplexProblem, z0: &DVector<f64>) -> DVector<f64> {
    let mut z = z0.clone();
    for _ in 0..1100 {
        if p.eval_f(&z).is_finite() || z.iter().all(|&v| v == 0.0) {
            break;
        }
        z *= 0.5;
    }
    z
}
