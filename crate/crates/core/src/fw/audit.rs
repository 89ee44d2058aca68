use serde::{Deserialize, Serialize};

use super::{FwConfig, RelaxationResult, RelaxationTrace};

/// Relative slack for re-checking the acceptance inequality with
/// from-scratch objective values, which carry their own rounding.
pub const ACCEPTANCE_SLACK: f64 = 1e-13;

/// Post-hoc invariant checks over one or more relaxation traces.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceAudit {
    pub runs: usize,
    pub steps: usize,
    pub max_backtracks: usize,
    /// Steps whose from-scratch values violate the acceptance inequality.
    pub acceptance_violations: usize,
    /// Iterations where the reference value `f_bar` increased.
    pub f_bar_increases: usize,
    /// Monotone runs only: steps that did not strictly decrease `f`.
    pub monotone_violations: usize,
    /// Largest `dual_k - f_final` over all iterations (<= 0 under weak duality).
    pub max_dual_excess: f64,
    pub max_cache_drift: f64,
    pub stalls: usize,
}

impl TraceAudit {
    pub fn new() -> Self {
        TraceAudit {
            max_dual_excess: f64::NEG_INFINITY,
            ..TraceAudit::default()
        }
    }

    pub fn record(&mut self, trace: &RelaxationTrace, result: &RelaxationResult, cfg: &FwConfig) {
        self.runs += 1;
        self.max_cache_drift = self.max_cache_drift.max(trace.final_cache_drift);
        self.stalls += trace.stalled as usize;

        let window = cfg.p_nm + 1;
        let mut scratch = vec![trace.f_start];
        let mut prev_f_bar = f64::INFINITY;
        for rec in &trace.records {
            self.max_dual_excess = self.max_dual_excess.max(rec.dual - result.f_star);
            if rec.f_bar > prev_f_bar {
                self.f_bar_increases += 1;
            }
            prev_f_bar = rec.f_bar;
            let Some(step) = rec.step else { continue };
            self.steps += 1;
            self.max_backtracks = self.max_backtracks.max(step.backtracks);

            let lo = scratch.len().saturating_sub(window);
            let f_bar = scratch[lo..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = ACCEPTANCE_SLACK * (1.0 + f_bar.abs());
            if step.f_scratch - f_bar > step.rhs + slack {
                self.acceptance_violations += 1;
            }
            scratch.push(step.f_scratch);

            if cfg.p_nm == 0 && !(step.delta < 0.0 && step.f_cached <= rec.f) {
                self.monotone_violations += 1;
            }
        }
    }

    pub fn merge(&mut self, other: &TraceAudit) {
        self.runs += other.runs;
        self.steps += other.steps;
        self.max_backtracks = self.max_backtracks.max(other.max_backtracks);
        self.acceptance_violations += other.acceptance_violations;
        self.f_bar_increases += other.f_bar_increases;
        self.monotone_violations += other.monotone_violations;
        self.max_dual_excess = self.max_dual_excess.max(other.max_dual_excess);
        self.max_cache_drift = self.max_cache_drift.max(other.max_cache_drift);
        self.stalls += other.stalls;
    }
}
