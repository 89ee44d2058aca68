//! Brute-force reference solver for small instances.
//!
//! Every integer assignment within the budget is enumerated. The continuous
//! remainder of each assignment is solved twice: by projected gradient on
//! the rescaled capped simplex, and for quadratic `h` by enumerating KKT
//! active sets. Apart from the projection this shares nothing with the
//! Frank-Wolfe solver.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{max_copies, MeanRiskInstance, RiskWeighting};
use crate::projection::project_capped_simplex;

/// Largest number of integer assignments the oracle will enumerate.
pub const ENUMERATION_LIMIT: f64 = 1e6;
/// Iteration cap of the projected-gradient path.
pub const PG_MAX_ITER: usize = 1_000_000;
/// Stop once the unit-step projected gradient is this small (max norm).
pub const PG_TOL: f64 = 1e-9;
/// The KKT path is skipped above this many continuous variables.
pub const KKT_MAX_DIM: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub objective_max: f64,
    pub y: Vec<f64>,
    /// Best minimization-form value over all assignments.
    pub value_min: f64,
    /// Number of integer assignments evaluated.
    pub assignments: usize,
    /// Largest disagreement between the two continuous paths (quadratic `h`).
    pub max_path_disagreement: Option<f64>,
}

/// `g(x) = h(sqrt(x'Mx + c'x + d)) - r'x - t` over `{x >= 0, a'x <= b}`.
struct Remainder<'a> {
    m: DMatrix<f64>,
    c: DVector<f64>,
    d: f64,
    r: DVector<f64>,
    t: f64,
    a: DVector<f64>,
    b: f64,
    h: &'a RiskWeighting,
}

impl Remainder<'_> {
    fn risk(&self, x: &DVector<f64>) -> f64 {
        ((&self.m * x).dot(x) + self.c.dot(x) + self.d).max(0.0)
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.h.eval(self.risk(x).sqrt()) - self.r.dot(x) - self.t
    }

    /// Gradient, with `-r` as the subgradient where the root is not differentiable.
    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let q = self.risk(x);
        let mx2c = &self.m * x * 2.0 + &self.c;
        let weight = match *self.h {
            RiskWeighting::Quadratic { omega } => omega,
            _ if q > 1e-300 => {
                let t = q.sqrt();
                self.h.deriv(t) / (2.0 * t)
            }
            RiskWeighting::ExpThreshold { gamma } if gamma > 0.0 => 0.0,
            RiskWeighting::ExpThreshold { .. } => 0.5,
            RiskWeighting::Linear { .. } => 0.0,
        };
        mx2c * weight - &self.r
    }

    fn scale(&self) -> DVector<f64> {
        self.a.map(|ai| self.b / ai)
    }

    /// Spectral projected gradient from `z0` in simplex coordinates.
    fn projected_gradient(&self, z0: DVector<f64>) -> (f64, DVector<f64>) {
        let s = self.scale();
        let f = |z: &DVector<f64>| self.value(&z.component_mul(&s));
        let grad = |z: &DVector<f64>| self.gradient(&z.component_mul(&s)).component_mul(&s);
        let mut z = z0;
        let mut fz = f(&z);
        let mut g = grad(&z);
        let mut step = 1.0;
        for _ in 0..PG_MAX_ITER {
            let unit = project_capped_simplex(&(&z - &g)) - &z;
            if unit.amax() <= PG_TOL {
                break;
            }
            let dir = project_capped_simplex(&(&z - &g * step)) - &z;
            let slope = g.dot(&dir);
            if slope >= 0.0 {
                break;
            }
            let mut t = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let zn = &z + &dir * t;
                let fn_ = f(&zn);
                if fn_ <= fz + 1e-4 * t * slope {
                    accepted = Some((zn, fn_));
                    break;
                }
                t *= 0.5;
            }
            let Some((zn, fn_)) = accepted else { break };
            let gn = grad(&zn);
            let sk = &zn - &z;
            let yk = &gn - &g;
            let sy = sk.dot(&yk);
            step = if sy > 0.0 { (sk.norm_squared() / sy).clamp(1e-12, 1e12) } else { 1e12 };
            z = zn;
            fz = fn_;
            g = gn;
        }
        (fz, z.component_mul(&s))
    }

    fn solve_pg(&self) -> (f64, DVector<f64>) {
        let n = self.r.len();
        let mut best = (self.value(&DVector::zeros(n)), DVector::zeros(n));
        let mut starts: Vec<DVector<f64>> = (0..n)
            .map(|i| {
                let mut e = DVector::zeros(n);
                e[i] = 1.0;
                e
            })
            .collect();
        starts.push(DVector::from_element(n, 1.0 / (n as f64 + 1.0)));
        for z0 in starts {
            let cand = self.projected_gradient(z0);
            if cand.0 < best.0 {
                best = cand;
            }
        }
        best
    }

    /// Exact minimizer for quadratic `h` by enumerating supports and the
    /// budget status, solving each KKT system directly.
    fn solve_kkt(&self, omega: f64) -> Option<(f64, DVector<f64>)> {
        let n = self.r.len();
        if n > KKT_MAX_DIM {
            return None;
        }
        // gradient of the smooth objective: 2 omega M x + omega c - r
        let lin = &self.c * omega - &self.r;
        let mut best: Option<(f64, DVector<f64>)> = None;
        for mask in 0u32..(1 << n) {
            let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
            for budget_active in [false, true] {
                let k = support.len();
                if k == 0 && budget_active {
                    continue;
                }
                let size = k + budget_active as usize;
                let mut lhs = DMatrix::zeros(size, size);
                let mut rhs = DVector::zeros(size);
                for (u, &i) in support.iter().enumerate() {
                    for (v, &j) in support.iter().enumerate() {
                        lhs[(u, v)] = 2.0 * omega * self.m[(i, j)];
                    }
                    rhs[u] = -lin[i];
                    if budget_active {
                        lhs[(u, k)] = self.a[i];
                        lhs[(k, u)] = self.a[i];
                    }
                }
                if budget_active {
                    rhs[k] = self.b;
                }
                let sol = if size == 0 {
                    DVector::zeros(0)
                } else {
                    match lhs.lu().solve(&rhs) {
                        Some(s) => s,
                        None => continue,
                    }
                };
                let mut x = DVector::zeros(n);
                for (u, &i) in support.iter().enumerate() {
                    x[i] = sol[u];
                }
                let lambda = if budget_active { sol[k] } else { 0.0 };
                let feas_tol = 1e-12 * (1.0 + self.b);
                if x.iter().any(|&v| v < -feas_tol) || self.a.dot(&x) > self.b + feas_tol || lambda < -1e-12 {
                    continue;
                }
                let grad = &self.m * &x * (2.0 * omega) + &lin + &self.a * lambda;
                if (0..n).any(|j| mask & (1 << j) == 0 && grad[j] < -1e-9) {
                    continue;
                }
                let x = x.map(|v| v.max(0.0));
                let val = self.value(&x);
                if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                    best = Some((val, x));
                }
            }
        }
        best
    }
}

/// Exhaustive solve. Fails with [`Error::EnumerationBudgetExceeded`] when
/// `prod_{i in I} (floor(b / a_i) + 1)` exceeds [`ENUMERATION_LIMIT`].
pub fn oracle_solve(inst: &MeanRiskInstance, h: &RiskWeighting) -> Result<OracleSolution> {
    h.validate()?;
    let ints = inst.integer_set().to_vec();
    let domains: Vec<i64> = ints.iter().map(|&i| max_copies(inst.b(), inst.a()[i])).collect();
    let count: f64 = domains.iter().map(|&u| (u + 1) as f64).product();
    if count > ENUMERATION_LIMIT {
        return Err(Error::EnumerationBudgetExceeded(count));
    }
    let cont: Vec<usize> = (0..inst.n()).filter(|i| !inst.is_integer(*i)).collect();
    let m = inst.m();

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut disagreement: Option<f64> = None;
    let mut assignments = 0usize;
    let mut values = vec![0i64; ints.len()];
    loop {
        let spent: f64 = ints.iter().zip(&values).map(|(&i, &v)| inst.a()[i] * v as f64).sum();
        if spent <= inst.b() * (1.0 + 1e-12) {
            assignments += 1;
            let mut y = vec![0.0; inst.n()];
            for (&i, &v) in ints.iter().zip(&values) {
                y[i] = v as f64;
            }
            let (val, y) = if cont.is_empty() {
                (inst.objective(h, &y), y)
            } else {
                let yi = DVector::from_iterator(ints.len(), values.iter().map(|&v| v as f64));
                let m_ci = DMatrix::from_fn(cont.len(), ints.len(), |u, v| m[(cont[u], ints[v])]);
                let m_ii = DMatrix::from_fn(ints.len(), ints.len(), |u, v| m[(ints[u], ints[v])]);
                let rem = Remainder {
                    m: DMatrix::from_fn(cont.len(), cont.len(), |u, v| m[(cont[u], cont[v])]),
                    c: &m_ci * &yi * 2.0,
                    d: (&m_ii * &yi).dot(&yi),
                    r: DVector::from_iterator(cont.len(), cont.iter().map(|&i| inst.r()[i])),
                    t: ints.iter().zip(&values).map(|(&i, &v)| inst.r()[i] * v as f64).sum(),
                    a: DVector::from_iterator(cont.len(), cont.iter().map(|&i| inst.a()[i])),
                    b: (inst.b() - spent).max(0.0),
                    h,
                };
                let (mut val, mut x) = if rem.b > 0.0 {
                    rem.solve_pg()
                } else {
                    (rem.value(&DVector::zeros(cont.len())), DVector::zeros(cont.len()))
                };
                if let RiskWeighting::Quadratic { omega } = *h {
                    if rem.b > 0.0 {
                        if let Some((kv, kx)) = rem.solve_kkt(omega) {
                            let gap = (kv - val).abs() / val.abs().max(1.0);
                            disagreement = Some(disagreement.map_or(gap, |g: f64| g.max(gap)));
                            if kv < val {
                                val = kv;
                                x = kx;
                            }
                        }
                    }
                }
                for (u, &i) in cont.iter().enumerate() {
                    y[i] = x[u];
                }
                (val, y)
            };
            if best.as_ref().is_none_or(|(bv, _)| val < *bv) {
                best = Some((val, y));
            }
        }
        // odometer increment
        let mut k = 0;
        while k < values.len() {
            if values[k] < domains[k] {
                values[k] += 1;
                break;
            }
            values[k] = 0;
            k += 1;
        }
        if k == values.len() {
            break;
        }
    }
    let (value_min, y) = best.expect("the zero assignment is always feasible");
    Ok(OracleSolution {
        objective_max: 0.0 - value_min,
        y,
        value_min,
        assignments,
        max_path_disagreement: disagreement,
    })
}
