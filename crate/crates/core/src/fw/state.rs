use std::collections::VecDeque;

use nalgebra::DVector;

use super::direction::{Direction, StepKind, Vertex};
use crate::error::{Error, Result};
use crate::model::{in_capped_simplex, SimplexProblem};

/// Frank-Wolfe iterate with the cached products needed for constant-time
/// trial evaluations in the line search.
#[derive(Debug, Clone)]
pub struct IterateState {
    z: DVector<f64>,
    qz: DVector<f64>,
    zqz: f64,
    cz: f64,
    muz: f64,
    sum_z: f64,
    zz: f64,
    f_cur: f64,
    f_start: f64,
    k: usize,
    /// Accepted decreases `f_{j+1} - f_j`, newest last, at most `p_nm` of them.
    deltas: VecDeque<f64>,
    /// Objective values matching `deltas`, newest last, at most `p_nm + 1`.
    values: VecDeque<f64>,
    p_nm: usize,
}

/// Steps between from-scratch recomputations of the caches.
pub const REFRESH_INTERVAL: usize = 1000;

/// Steps with `|delta| > RESYNC_RATIO * |f|` reset the objective from the
/// cached parts instead of accumulating the increment.
pub const RESYNC_RATIO: f64 = 1e-3;

/// Coefficients `(lambda, sigma)` of the update `z + alpha d = lambda z + sigma v`.
#[inline]
pub(crate) fn affine_coefficients(kind: StepKind, alpha: f64) -> (f64, f64) {
    match kind {
        StepKind::Toward => (1.0 - alpha, alpha),
        StepKind::Away => (1.0 + alpha, -alpha),
    }
}

impl IterateState {
    /// Computes all caches from scratch. `p_nm` is the length of the
    /// non-monotone memory (0 = monotone).
    pub fn new(p: &SimplexProblem, z0: &DVector<f64>, p_nm: usize) -> Result<Self> {
        if z0.len() != p.dim() || !in_capped_simplex(z0) {
            return Err(Error::InfeasibleStart);
        }
        let z = z0.map(|v| v.max(0.0));
        let qz = p.q() * &z;
        let zqz = qz.dot(&z);
        let cz = p.c().dot(&z);
        let muz = p.mu().dot(&z);
        let f_cur = p.value_from_parts(zqz, cz, muz);
        Ok(IterateState {
            sum_z: z.sum(),
            zz: z.norm_squared(),
            z,
            qz,
            zqz,
            cz,
            muz,
            f_cur,
            f_start: f_cur,
            k: 0,
            deltas: VecDeque::with_capacity(p_nm),
            values: VecDeque::from([f_cur]),
            p_nm,
        })
    }

    pub fn z(&self) -> &DVector<f64> {
        &self.z
    }

    pub fn qz(&self) -> &DVector<f64> {
        &self.qz
    }

    pub fn zqz(&self) -> f64 {
        self.zqz
    }

    pub fn cz(&self) -> f64 {
        self.cz
    }

    pub fn muz(&self) -> f64 {
        self.muz
    }

    pub fn sum_z(&self) -> f64 {
        self.sum_z
    }

    pub fn norm_sq(&self) -> f64 {
        self.zz
    }

    /// Objective at `z`: the starting value plus the accepted increments.
    pub fn value(&self) -> f64 {
        self.f_cur
    }

    /// Objective at the starting point.
    pub fn start_value(&self) -> f64 {
        self.f_start
    }

    pub fn iteration(&self) -> usize {
        self.k
    }

    /// Reference value: max of the last `min(p_nm, k) + 1` objective values.
    pub fn f_bar(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `f_bar - f(z) >= 0`, summed from the stored decreases rather than
    /// by subtracting rounded objective values.
    pub fn f_bar_excess(&self) -> f64 {
        let mut back = 0.0f64;
        let mut best = 0.0f64;
        for d in self.deltas.iter().rev() {
            back -= d;
            best = best.max(back);
        }
        best
    }

    pub fn risk_arg(&self, p: &SimplexProblem) -> f64 {
        self.zqz + self.cz + p.d()
    }

    pub fn gradient(&self, p: &SimplexProblem) -> Result<DVector<f64>> {
        p.grad_from_parts(&self.qz, self.risk_arg(p))
    }

    /// `f(z + alpha d)` in constant time from the caches.
    pub fn trial_value(&self, p: &SimplexProblem, dir: &Direction, alpha: f64) -> f64 {
        let (lambda, sigma) = affine_coefficients(dir.kind, alpha);
        let (zqz, cz, muz) = match dir.vertex {
            Vertex::Origin => (lambda * lambda * self.zqz, lambda * self.cz, lambda * self.muz),
            Vertex::Unit(i) => (
                lambda * lambda * self.zqz
                    + 2.0 * lambda * sigma * self.qz[i]
                    + sigma * sigma * p.q()[(i, i)],
                lambda * self.cz + sigma * p.c()[i],
                lambda * self.muz + sigma * p.mu()[i],
            ),
        };
        p.value_from_parts(zqz, cz, muz)
    }

    /// `f(z + alpha d) - f(z)` in constant time, computed from the increments
    /// of the cached products so that small decreases are not lost to
    /// cancellation.
    pub fn trial_delta(&self, p: &SimplexProblem, dir: &Direction, alpha: f64) -> f64 {
        let s = match dir.kind {
            StepKind::Toward => alpha,
            StepKind::Away => -alpha,
        };
        // z + alpha d = z + s (v - z)
        let (qv, qvv, cv, muv) = match dir.vertex {
            Vertex::Origin => (0.0, 0.0, 0.0, 0.0),
            Vertex::Unit(i) => (self.qz[i], p.q()[(i, i)], p.c()[i], p.mu()[i]),
        };
        let d_zqz = 2.0 * s * (qv - self.zqz) + s * s * (self.zqz - 2.0 * qv + qvv);
        let d_cz = s * (cv - self.cz);
        let d_muz = s * (muv - self.muz);
        p.delta_from_parts(self.zqz, self.cz, d_zqz, d_cz, d_muz)
    }

    /// Moves to `z + alpha d`, updating scalars in O(1) and `Qz` in O(dim).
    /// `delta` is the accepted decrease from [`IterateState::trial_delta`].
    pub fn apply_step(&mut self, p: &SimplexProblem, dir: &Direction, alpha: f64, delta: f64) {
        let (lambda, sigma) = affine_coefficients(dir.kind, alpha);
        match dir.vertex {
            Vertex::Origin => {
                self.zqz *= lambda * lambda;
                self.cz *= lambda;
                self.muz *= lambda;
                self.sum_z *= lambda;
                self.zz *= lambda * lambda;
                self.qz *= lambda;
                self.z *= lambda;
            }
            Vertex::Unit(i) => {
                let zi = self.z[i];
                self.zqz = lambda * lambda * self.zqz
                    + 2.0 * lambda * sigma * self.qz[i]
                    + sigma * sigma * p.q()[(i, i)];
                self.cz = lambda * self.cz + sigma * p.c()[i];
                self.muz = lambda * self.muz + sigma * p.mu()[i];
                self.sum_z = lambda * self.sum_z + sigma;
                self.zz = lambda * lambda * self.zz + 2.0 * lambda * sigma * zi + sigma * sigma;
                self.qz *= lambda;
                self.qz.axpy(sigma, &p.q().column(i), 1.0);
                self.z *= lambda;
                self.z[i] += sigma;
                if dir.kind == StepKind::Away && (alpha >= dir.alpha_max || self.z[i] < 0.0) {
                    // drop step: the away vertex leaves the support exactly
                    self.z[i] = 0.0;
                }
            }
        }
        // a large step leaves more rounding in the running sum than a fresh
        // evaluation of the cached parts has
        let f_parts = p.value_from_parts(self.zqz, self.cz, self.muz);
        self.f_cur = if delta.abs() > RESYNC_RATIO * f_parts.abs() {
            f_parts
        } else {
            self.f_cur + delta
        };
        self.k += 1;
        if self.p_nm > 0 {
            if self.deltas.len() == self.p_nm {
                self.deltas.pop_front();
                self.values.pop_front();
            }
            self.deltas.push_back(delta);
        } else {
            self.values.pop_front();
        }
        self.values.push_back(self.f_cur);
        if self.k.is_multiple_of(REFRESH_INTERVAL) {
            self.refresh(p);
        }
    }

    /// Recomputes the product caches from scratch. The objective keeps its
    /// accumulated value so that the history stays consistent with the
    /// accepted increments.
    pub fn refresh(&mut self, p: &SimplexProblem) {
        self.qz = p.q() * &self.z;
        self.zqz = self.qz.dot(&self.z);
        self.cz = p.c().dot(&self.z);
        self.muz = p.mu().dot(&self.z);
        self.sum_z = self.z.sum();
        self.zz = self.z.norm_squared();
    }

    /// Largest relative deviation of the caches from a from-scratch recomputation.
    ///
    /// Each scalar is compared relative to the sum of absolute values of its
    /// terms, so cancellation in the exact value does not inflate the error.
    pub fn cache_drift(&self, p: &SimplexProblem) -> f64 {
        let z = &self.z;
        let absz = z.abs();
        let qz = p.q() * z;
        let qz_mag = p.q().abs() * &absz;
        let rel = |cached: f64, exact: f64, mag: f64| {
            if mag == 0.0 {
                (cached - exact).abs()
            } else {
                (cached - exact).abs() / mag
            }
        };
        let mut drift = 0.0f64;
        for i in 0..z.len() {
            drift = drift.max(rel(self.qz[i], qz[i], qz_mag[i]));
        }
        drift = drift.max(rel(self.zqz, qz.dot(z), qz_mag.dot(&absz)));
        drift = drift.max(rel(self.cz, p.c().dot(z), p.c().abs().dot(&absz)));
        drift = drift.max(rel(self.muz, p.mu().dot(z), p.mu().abs().dot(&absz)));
        drift = drift.max(rel(self.sum_z, z.sum(), absz.sum()));
        drift
    }
}

#[cfg(test)]
impl IterateState {
    /// Replaces the objective history (oldest first); the last entry must be the current value.
    pub(crate) fn with_history(mut self, values: &[f64]) -> Self {
        self.deltas = values.windows(2).map(|w| w[1] - w[0]).collect();
        self.values = values.iter().copied().collect();
        while self.deltas.len() > self.p_nm {
            self.deltas.pop_front();
        }
        while self.values.len() > self.p_nm + 1 {
            self.values.pop_front();
        }
        self.k = values.len() - 1;
        self
    }
}
