//! Optimality test for the origin when the objective is non-smooth there.
//!
//! With `c = 0` and `d = 0` the subdifferential at the origin is
//! `h'(0) Q^{1/2} B - mu`. The origin is optimal iff some `v` in the unit
//! ball satisfies `h'(0) Q^{1/2} v >= mu`, i.e. iff
//! `min_{y >= 0} (y + mu)' Q^{-1} (y + mu) <= h'(0)^2`.

use log::warn;
use nalgebra::{Cholesky, DVector, Dyn};

use crate::model::SimplexProblem;

const POWER_ITERATIONS: usize = 20;
const MAX_ITERATIONS: usize = 10_000;
const PROJECTED_GRADIENT_TOL: f64 = 1e-9;
const VERDICT_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OriginVerdict {
    OriginOptimal,
    NotOptimal,
}

#[derive(Debug, Clone)]
pub struct OriginCheck {
    pub verdict: OriginVerdict,
    /// Whether the inner nonnegative least-squares problem was solved.
    pub solved: bool,
    /// Best value of `(y + mu)' Q^{-1} (y + mu)` found.
    pub value: Option<f64>,
    /// `max(Q^{-1}(y + mu), 0)` at the final `y`; a descent direction from
    /// the origin when the verdict is `NotOptimal`.
    pub descent_hint: Option<DVector<f64>>,
}

pub fn origin_optimality_check(p: &SimplexProblem) -> OriginVerdict {
    origin_check(p).verdict
}

pub fn origin_check(p: &SimplexProblem) -> OriginCheck {
    let mu = p.mu();
    let quick = |verdict| OriginCheck {
        verdict,
        solved: false,
        value: None,
        descent_hint: None,
    };

    if p.d() > 0.0 {
        // smooth at the origin: optimal iff no vertex has a negative slope
        let g = match p.grad_f(&DVector::zeros(p.dim())) {
            Ok(g) => g,
            Err(_) => return quick(OriginVerdict::NotOptimal),
        };
        return quick(if g.min() >= 0.0 {
            OriginVerdict::OriginOptimal
        } else {
            OriginVerdict::NotOptimal
        });
    }

    if mu.iter().all(|&m| m <= 0.0) {
        // y = -mu attains zero
        return quick(OriginVerdict::OriginOptimal);
    }
    let slope0 = p.h().deriv(0.0);
    if slope0 == 0.0 {
        return quick(OriginVerdict::NotOptimal);
    }
    let threshold = slope0 * slope0 + VERDICT_SLACK;

    let Some(chol) = Cholesky::<f64, Dyn>::new(p.q().clone()) else {
        return quick(OriginVerdict::NotOptimal);
    };

    let n = p.dim();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let w = chol.solve(&v);
        lambda = v.dot(&w);
        let norm = w.norm();
        if norm == 0.0 {
            break;
        }
        v = w / norm;
    }
    let mut step = 1.0 / (2.0 * lambda.max(f64::MIN_POSITIVE));

    let mut y = mu.map(|m| (-m).max(0.0));
    let w = &y + mu;
    let mut qinv_w = chol.solve(&w);
    let mut value = w.dot(&qinv_w);
    let mut converged = false;
    for _ in 0..MAX_ITERATIONS {
        if value <= threshold {
            break;
        }
        let y_next = (&y - &qinv_w * (2.0 * step)).map(|v| v.max(0.0));
        let w_next = &y_next + mu;
        let qinv_next = chol.solve(&w_next);
        let value_next = w_next.dot(&qinv_next);
        if value_next > value {
            step *= 0.5;
            continue;
        }
        let moved = (&y_next - &y).norm() / step;
        y = y_next;
        qinv_w = qinv_next;
        value = value_next;
        if moved <= PROJECTED_GRADIENT_TOL {
            converged = true;
            break;
        }
    }
    let verdict = if value <= threshold {
        OriginVerdict::OriginOptimal
    } else {
        if !converged {
            warn!(
                "origin check did not converge (value {value:e}, threshold {threshold:e}); assuming not optimal"
            );
        }
        OriginVerdict::NotOptimal
    };
    OriginCheck {
        verdict,
        solved: true,
        value: Some(value),
        descent_hint: Some(qinv_w.map(|v| v.max(0.0))),
    }
}

/// Finds a feasible point with `f(z) < f(0)`.
///
/// Tries the vertices, then successively shorter multiples of the descent
/// hint and of the vertices with positive `mu`.
pub fn point_better_than_origin(p: &SimplexProblem, check: &OriginCheck) -> Option<DVector<f64>> {
    let n = p.dim();
    let f0 = p.origin_value();
    let mut directions: Vec<DVector<f64>> = Vec::new();
    if let Some(u) = &check.descent_hint {
        let s = u.sum();
        if s > 0.0 {
            directions.push(u / s);
        }
    }
    let mut by_mu: Vec<usize> = (0..n).filter(|&i| p.mu()[i] > 0.0).collect();
    by_mu.sort_by(|&i, &j| p.mu()[j].total_cmp(&p.mu()[i]));
    for i in by_mu {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        directions.push(e);
    }
    let mut scale = 1.0;
    for _ in 0..=60 {
        for dir in &directions {
            let z = dir * scale;
            if p.eval_f(&z) < f0 {
                return Some(z);
            }
        }
        scale *= 0.5;
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RiskWeighting;
    use nalgebra::DMatrix;

    fn one_dim(mu: f64, omega: f64) -> SimplexProblem {
        SimplexProblem::new(
            DMatrix::from_element(1, 1, 1.0),
            DVector::zeros(1),
            0.0,
            DVector::from_element(1, mu),
            0.0,
            RiskWeighting::Linear { omega },
        )
        .unwrap()
    }

    #[test]
    fn one_dimensional_closed_form() {
        assert_eq!(origin_optimality_check(&one_dim(1.0, 2.0)), OriginVerdict::OriginOptimal);
        assert_eq!(origin_optimality_check(&one_dim(1.0, 0.5)), OriginVerdict::NotOptimal);
    }

    #[test]
    fn zero_slope_skips_inner_solve() {
        let p = SimplexProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            0.0,
            DVector::from_vec(vec![0.1, -0.5]),
            0.0,
            RiskWeighting::Quadratic { omega: 10.0 },
        )
        .unwrap();
        let c = origin_check(&p);
        assert_eq!(c.verdict, OriginVerdict::NotOptimal);
        assert!(!c.solved);
    }

    #[test]
    fn nonpositive_returns_make_origin_optimal() {
        let p = SimplexProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            0.0,
            DVector::from_vec(vec![0.0, -0.5]),
            0.0,
            RiskWeighting::Quadratic { omega: 1.0 },
        )
        .unwrap();
        assert_eq!(origin_optimality_check(&p), OriginVerdict::OriginOptimal);
    }

    #[test]
    fn escape_point_beats_origin() {
        // optimum is interior and close to zero; no vertex beats the origin
        let p = SimplexProblem::new(
            DMatrix::identity(2, 2),
            DVector::zeros(2),
            0.0,
            DVector::from_vec(vec![0.01, 0.01]),
            0.0,
            RiskWeighting::Quadratic { omega: 1.0 },
        )
        .unwrap();
        assert!(p.eval_f(&DVector::from_vec(vec![1.0, 0.0])) > 0.0);
        let check = origin_check(&p);
        let z = point_better_than_origin(&p, &check).unwrap();
        assert!(p.eval_f(&z) < p.origin_value());
    }

    #[test]
    fn descent_hint_for_linear_risk() {
        // correlated assets: each vertex alone is worse than the origin,
        // a mixture is better
        let q = DMatrix::from_row_slice(2, 2, &[1.0, -0.9, -0.9, 1.0]);
        let p = SimplexProblem::new(
            q,
            DVector::zeros(2),
            0.0,
            DVector::from_vec(vec![0.5, 0.5]),
            0.0,
            RiskWeighting::Linear { omega: 1.0 },
        )
        .unwrap();
        assert!(p.eval_f(&DVector::from_vec(vec![1.0, 0.0])) > 0.0);
        let check = origin_check(&p);
        assert_eq!(check.verdict, OriginVerdict::NotOptimal);
        let z = point_better_than_origin(&p, &check).unwrap();
        assert!(p.eval_f(&z) < 0.0);
    }
}
