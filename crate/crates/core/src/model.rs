//! Problem data for mean-risk knapsack problems.
//!
//! The original problem is
//!
//! ```text
//! max  r'y - h(sqrt(y'My))   s.t.  a'y <= b,  y >= 0,  y_i integer for i in I
//! ```
//!
//! All solving happens in minimization form, `h(sqrt(y'My)) - r'y`. Fixing
//! integer variables moves coefficients of `M` into a linear and a constant
//! term under the root, which is why [`FixedSubproblem`] carries `c_s` and
//! `d_s`. Each node relaxation is then rescaled onto the capped simplex
//! `{z : 1'z <= 1, z >= 0}` as a [`SimplexProblem`].

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Entrywise asymmetry tolerated (and averaged away) in a covariance input.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// Risk-weighting function `h`: convex, differentiable and non-decreasing on `t >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskWeighting {
    /// `h(t) = omega * t`.
    Linear { omega: f64 },
    /// `h(t) = omega * t^2`.
    Quadratic { omega: f64 },
    /// `h(t) = 0` for `t <= gamma`, `exp(t - gamma) - (t - gamma + 1)` beyond.
    ExpThreshold { gamma: f64 },
}

impl RiskWeighting {
    /// Linear weighting with `omega = sqrt((1 - eps) / eps)` for a confidence level `eps` in (0, 1].
    pub fn linear_from_confidence(epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(Error::InvalidRisk(format!(
                "confidence level must lie in (0, 1], got {epsilon}"
            )));
        }
        Ok(RiskWeighting::Linear {
            omega: ((1.0 - epsilon) / epsilon).sqrt(),
        })
    }

    pub fn validate(&self) -> Result<()> {
        let (name, value) = match *self {
            RiskWeighting::Linear { omega } => ("omega", omega),
            RiskWeighting::Quadratic { omega } => ("omega", omega),
            RiskWeighting::ExpThreshold { gamma } => ("gamma", gamma),
        };
        if value.is_finite() && value >= 0.0 {
            Ok(())
        } else {
            Err(Error::InvalidRisk(format!(
                "{name} must be finite and nonnegative, got {value}"
            )))
        }
    }

    #[inline]
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            RiskWeighting::Linear { omega } => omega * t,
            RiskWeighting::Quadratic { omega } => omega * t * t,
            RiskWeighting::ExpThreshold { gamma } => {
                let u = t - gamma;
                if u <= 0.0 {
                    0.0
                } else {
                    // exp(u) - (u + 1) without cancellation for small u
                    u.exp_m1() - u
                }
            }
        }
    }

    #[inline]
    pub fn deriv(&self, t: f64) -> f64 {
        match *self {
            RiskWeighting::Linear { omega } => omega,
            RiskWeighting::Quadratic { omega } => 2.0 * omega * t,
            RiskWeighting::ExpThreshold { gamma } => {
                let u = t - gamma;
                if u <= 0.0 {
                    0.0
                } else {
                    u.exp_m1()
                }
            }
        }
    }

    /// `h(sqrt(q + dq)) - h(sqrt(q))` for `q, q + dq >= 0`, accurate when
    /// `dq` is small relative to `q`.
    pub fn sqrt_delta(&self, q: f64, dq: f64) -> f64 {
        let q_new = (q + dq).max(0.0);
        let (t, t_new) = (q.sqrt(), q_new.sqrt());
        let dt = if t + t_new > 0.0 { dq / (t + t_new) } else { 0.0 };
        match *self {
            RiskWeighting::Linear { omega } => omega * dt,
            RiskWeighting::Quadratic { omega } => omega * dq,
            RiskWeighting::ExpThreshold { gamma } => {
                let (u, u_new) = (t - gamma, t_new - gamma);
                if u > 0.0 && u_new > 0.0 {
                    // e^u expm1(dt) - dt = (e^u - 1) expm1(dt) + (expm1(dt) - dt)
                    let e = dt.exp_m1();
                    let tail = if dt.abs() < 1e-4 {
                        dt * dt * (0.5 + dt / 6.0 + dt * dt / 24.0)
                    } else {
                        e - dt
                    };
                    u.exp_m1() * e + tail
                } else {
                    self.eval(t_new) - self.eval(t)
                }
            }
        }
    }

    /// Short label used in reports, e.g. `linear(omega=0.229)`.
    pub fn label(&self) -> String {
        match *self {
            RiskWeighting::Linear { omega } => format!("linear(omega={omega})"),
            RiskWeighting::Quadratic { omega } => format!("quad(omega={omega})"),
            RiskWeighting::ExpThreshold { gamma } => format!("exp(gamma={gamma})"),
        }
    }
}

/// Largest number of copies of an item with `price` that fit into `budget`.
///
/// Quotients within a few ulps below an integer are rounded up so that
/// budgets like `3 * a_i` admit exactly three copies.
pub fn max_copies(budget: f64, price: f64) -> i64 {
    if budget <= 0.0 {
        return 0;
    }
    let q = budget / price;
    let k = q.floor();
    let k = if q - k > 1.0 - 1e-12 { k + 1.0 } else { k };
    k as i64
}

/// Original problem data `(r, M, a, b, I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanRiskInstance {
    r: DVector<f64>,
    a: DVector<f64>,
    b: f64,
    m: DMatrix<f64>,
    integer_set: Vec<usize>,
}

impl MeanRiskInstance {
    /// Builds and validates an instance. `integer_set` holds 0-based indices.
    pub fn new(
        r: Vec<f64>,
        a: Vec<f64>,
        b: f64,
        m: DMatrix<f64>,
        mut integer_set: Vec<usize>,
    ) -> Result<Self> {
        let n = r.len();
        if n == 0 {
            return Err(Error::InvalidInstance("no variables".into()));
        }
        if a.len() != n {
            return Err(Error::InvalidInstance(format!(
                "price vector has length {} but n = {n}",
                a.len()
            )));
        }
        if m.nrows() != n || m.ncols() != n {
            return Err(Error::InvalidInstance(format!(
                "covariance is {}x{} but n = {n}",
                m.nrows(),
                m.ncols()
            )));
        }
        if r.iter().chain(a.iter()).chain(m.iter()).any(|v| !v.is_finite()) || !b.is_finite() {
            return Err(Error::InvalidInstance("non-finite entry".into()));
        }
        if let Some(i) = a.iter().position(|&v| v <= 0.0) {
            return Err(Error::InvalidInstance(format!(
                "price a[{i}] = {} must be positive",
                a[i]
            )));
        }
        if b <= 0.0 {
            return Err(Error::InvalidInstance(format!("budget {b} must be positive")));
        }
        integer_set.sort_unstable();
        integer_set.dedup();
        if let Some(&i) = integer_set.iter().find(|&&i| i >= n) {
            return Err(Error::InvalidInstance(format!(
                "integer index {i} out of range for n = {n}"
            )));
        }

        let m = symmetrize(m)?;
        if m.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }

        Ok(MeanRiskInstance {
            r: DVector::from_vec(r),
            a: DVector::from_vec(a),
            b,
            m,
            integer_set,
        })
    }

    pub fn n(&self) -> usize {
        self.r.len()
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Sorted 0-based indices of integer variables.
    pub fn integer_set(&self) -> &[usize] {
        &self.integer_set
    }

    pub fn is_integer(&self, i: usize) -> bool {
        self.integer_set.binary_search(&i).is_ok()
    }

    /// Same instance with a different budget.
    pub fn with_budget(&self, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidInstance(format!("budget {b} must be positive")));
        }
        let mut out = self.clone();
        out.b = b;
        Ok(out)
    }

    /// Objective in minimization form: `h(sqrt(y'My)) - r'y`.
    pub fn objective(&self, h: &RiskWeighting, y: &[f64]) -> f64 {
        let y = DVector::from_column_slice(y);
        let q = (&self.m * &y).dot(&y).max(0.0);
        h.eval(q.sqrt()) - self.r.dot(&y)
    }

    /// Checks `a'y <= b + tol`, `y >= -tol` and integrality on `I` to `tol`.
    pub fn is_feasible(&self, y: &[f64], tol: f64) -> bool {
        if y.len() != self.n() {
            return false;
        }
        let spent: f64 = y.iter().zip(self.a.iter()).map(|(yi, ai)| yi * ai).sum();
        spent <= self.b + tol
            && y.iter().all(|&v| v >= -tol)
            && self
                .integer_set
                .iter()
                .all(|&i| (y[i] - y[i].round()).abs() <= tol)
    }
}

fn symmetrize(m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL {
        return Err(Error::NotSymmetric(asym));
    }
    if asym == 0.0 {
        return Ok(m);
    }
    Ok((&m + m.transpose()) * 0.5)
}

/// Reduced problem after fixing some integer variables to values.
///
/// The reduced objective over the free variables `x` is
/// `h(sqrt(x'M_s x + c_s'x + d_s)) - r_s'x - t_s` with budget `a_s'x <= b_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedSubproblem {
    n_total: usize,
    fixings: Vec<(usize, i64)>,
    m: DMatrix<f64>,
    c: DVector<f64>,
    d: f64,
    r: DVector<f64>,
    t: f64,
    a: DVector<f64>,
    b: f64,
    free: Vec<usize>,
    integer: Vec<bool>,
}

impl FixedSubproblem {
    pub fn root(inst: &MeanRiskInstance) -> Self {
        let n = inst.n();
        FixedSubproblem {
            n_total: n,
            fixings: Vec::new(),
            m: inst.m.clone(),
            c: DVector::zeros(n),
            d: 0.0,
            r: inst.r.clone(),
            t: 0.0,
            a: inst.a.clone(),
            b: inst.b,
            free: (0..n).collect(),
            integer: (0..n).map(|i| inst.is_integer(i)).collect(),
        }
    }

    /// Fixes the free variable at reduced position `pos` to the integer `value`.
    pub fn fix_variable(&self, pos: usize, value: i64) -> Result<Self> {
        let dim = self.dim();
        if pos >= dim {
            return Err(Error::InvalidInstance(format!(
                "position {pos} out of range for {dim} free variables"
            )));
        }
        if value < 0 || value > max_copies(self.b, self.a[pos]) {
            return Err(Error::InfeasibleFixing {
                position: pos,
                value,
            });
        }
        let s = value as f64;
        let keep: Vec<usize> = (0..dim).filter(|&k| k != pos).collect();

        let m = self.m.select_rows(&keep).select_columns(&keep);
        let col = self.m.column(pos);
        let c = DVector::from_iterator(
            keep.len(),
            keep.iter().map(|&k| self.c[k] + 2.0 * s * col[k]),
        );
        let d = self.d + s * s * self.m[(pos, pos)] + s * self.c[pos];
        let r = self.r.select_rows(&keep);
        let t = self.t + s * self.r[pos];
        let a = self.a.select_rows(&keep);
        let b = (self.b - s * self.a[pos]).max(0.0);

        let mut fixings = self.fixings.clone();
        fixings.push((self.free[pos], value));

        Ok(FixedSubproblem {
            n_total: self.n_total,
            fixings,
            m,
            c,
            d,
            r,
            t,
            a,
            b,
            free: keep.iter().map(|&k| self.free[k]).collect(),
            integer: keep.iter().map(|&k| self.integer[k]).collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.free.len()
    }

    /// Fixed `(original index, value)` pairs in fixing order.
    pub fn fixings(&self) -> &[(usize, i64)] {
        &self.fixings
    }

    pub fn m(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn r(&self) -> &DVector<f64> {
        &self.r
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn a(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// Reduced position -> original index.
    pub fn free_index_map(&self) -> &[usize] {
        &self.free
    }

    pub fn is_integer_position(&self, pos: usize) -> bool {
        self.integer[pos]
    }

    pub fn free_integer_positions(&self) -> impl Iterator<Item = usize> + '_ {
        self.integer
            .iter()
            .enumerate()
            .filter_map(|(k, &int)| int.then_some(k))
    }

    pub fn has_free_integers(&self) -> bool {
        self.integer.iter().any(|&b| b)
    }

    /// Domain upper bound `floor(b_s / a_s[pos])` for a free variable.
    pub fn max_value(&self, pos: usize) -> i64 {
        max_copies(self.b, self.a[pos])
    }

    /// Reduced objective at a completion `x` of the free variables.
    pub fn objective(&self, h: &RiskWeighting, x: &[f64]) -> f64 {
        let x = DVector::from_column_slice(x);
        let q = ((&self.m * &x).dot(&x) + self.c.dot(&x) + self.d).max(0.0);
        h.eval(q.sqrt()) - self.r.dot(&x) - self.t
    }

    /// Full-length vector in original units from a completion of the free variables.
    pub fn assemble(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n_total];
        for &(i, v) in &self.fixings {
            y[i] = v as f64;
        }
        for (&i, &xi) in self.free.iter().zip(x) {
            y[i] = xi;
        }
        y
    }
}

/// Node relaxation over the capped simplex:
/// `min h(sqrt(z'Qz + c'z + d)) - mu'z - t_off` with `1'z <= 1`, `z >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexProblem {
    q: DMatrix<f64>,
    c: DVector<f64>,
    d: f64,
    mu: DVector<f64>,
    t_off: f64,
    scale: DVector<f64>,
    h: RiskWeighting,
}

impl SimplexProblem {
    /// Rescales a subproblem with `y_i = (b_s / a_i) z_i`.
    pub fn from_subproblem(sub: &FixedSubproblem, h: RiskWeighting) -> Result<Self> {
        if sub.dim() == 0 {
            return Err(Error::DimensionZero);
        }
        if sub.b <= 0.0 {
            return Err(Error::BudgetExhausted);
        }
        let scale = sub.a.map(|ai| sub.b / ai);
        let dim = sub.dim();
        let q = DMatrix::from_fn(dim, dim, |i, j| scale[i] * scale[j] * sub.m[(i, j)]);
        Ok(SimplexProblem {
            q,
            c: sub.c.component_mul(&scale),
            d: sub.d,
            mu: sub.r.component_mul(&scale),
            t_off: sub.t,
            scale,
            h,
        })
    }

    /// Direct construction; `scale` defaults to ones.
    pub fn new(
        q: DMatrix<f64>,
        c: DVector<f64>,
        d: f64,
        mu: DVector<f64>,
        t_off: f64,
        h: RiskWeighting,
    ) -> Result<Self> {
        let dim = mu.len();
        if dim == 0 {
            return Err(Error::DimensionZero);
        }
        if q.nrows() != dim || q.ncols() != dim || c.len() != dim {
            return Err(Error::InvalidInstance("inconsistent simplex problem sizes".into()));
        }
        if !(d >= 0.0) {
            return Err(Error::InvalidInstance(format!("constant d = {d} must be >= 0")));
        }
        let q = symmetrize(q)?;
        if q.clone().cholesky().is_none() {
            return Err(Error::NotPositiveDefinite);
        }
        h.validate()?;
        Ok(SimplexProblem {
            q,
            c,
            d,
            mu,
            t_off,
            scale: DVector::from_element(dim, 1.0),
            h,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn c(&self) -> &DVector<f64> {
        &self.c
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn t_off(&self) -> f64 {
        self.t_off
    }

    pub fn scale(&self) -> &DVector<f64> {
        &self.scale
    }

    pub fn h(&self) -> &RiskWeighting {
        &self.h
    }

    /// True when the root term vanishes at the origin, so `f` may be non-smooth there.
    pub fn origin_is_singular(&self) -> bool {
        self.d == 0.0
    }

    /// `q(z) = z'Qz + c'z + d`.
    pub fn risk_arg(&self, z: &DVector<f64>) -> f64 {
        (&self.q * z).dot(z) + self.c.dot(z) + self.d
    }

    /// Objective from the cached scalars `z'Qz`, `c'z` and `mu'z`.
    #[inline]
    pub fn value_from_parts(&self, zqz: f64, cz: f64, muz: f64) -> f64 {
        let q = (zqz + cz + self.d).max(0.0);
        self.h.eval(q.sqrt()) - muz - self.t_off
    }

    /// `f(z') - f(z)` from the cached scalars at `z` and their increments.
    #[inline]
    pub fn delta_from_parts(&self, zqz: f64, cz: f64, d_zqz: f64, d_cz: f64, d_muz: f64) -> f64 {
        let q_raw = zqz + cz + self.d;
        let q = q_raw.max(0.0);
        let dq = (q_raw + d_zqz + d_cz).max(0.0) - q;
        // the increment is used as given unless clamping changed it
        let dq = if q_raw > 0.0 && q_raw + d_zqz + d_cz > 0.0 { d_zqz + d_cz } else { dq };
        self.h.sqrt_delta(q, dq) - d_muz
    }

    pub fn eval_f(&self, z: &DVector<f64>) -> f64 {
        self.value_from_parts((&self.q * z).dot(z), self.c.dot(z), self.mu.dot(z))
    }

    /// `f(0) = h(sqrt(d)) - t_off`.
    pub fn origin_value(&self) -> f64 {
        self.h.eval(self.d.sqrt()) - self.t_off
    }

    /// Gradient `h'(sqrt q) (2Qz + c) / (2 sqrt q) - mu`.
    pub fn grad_f(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        let qz = &self.q * z;
        let q = qz.dot(z) + self.c.dot(z) + self.d;
        self.grad_from_parts(&qz, q)
    }

    /// Gradient from a cached `Qz` and `q(z)`.
    pub fn grad_from_parts(&self, qz: &DVector<f64>, q: f64) -> Result<DVector<f64>> {
        if let RiskWeighting::Quadratic { omega } = self.h {
            // h(sqrt q) = omega q is smooth everywhere
            return Ok(DVector::from_fn(self.dim(), |i, _| {
                omega * (2.0 * qz[i] + self.c[i]) - self.mu[i]
            }));
        }
        if q < 1e-300 {
            if self.h.deriv(0.0) == 0.0 {
                return Ok(-&self.mu);
            }
            return Err(Error::GradientUndefined);
        }
        let root = q.sqrt();
        let w = self.h.deriv(root) / (2.0 * root);
        Ok(DVector::from_fn(self.dim(), |i, _| {
            w * (2.0 * qz[i] + self.c[i]) - self.mu[i]
        }))
    }

    /// Maps simplex coordinates back to original units, `y = scale o z`.
    pub fn to_original(&self, z: &DVector<f64>) -> DVector<f64> {
        z.component_mul(&self.scale)
    }

    /// Inverse of [`SimplexProblem::to_original`].
    pub fn from_original(&self, y: &DVector<f64>) -> DVector<f64> {
        y.component_div(&self.scale)
    }
}

/// True if `z` lies in the capped simplex up to small tolerances.
pub fn in_capped_simplex(z: &DVector<f64>) -> bool {
    z.iter().all(|&v| v >= -1e-14) && z.sum() <= 1.0 + 1e-12
}
