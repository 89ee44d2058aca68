use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::state::IterateState;

/// Cap on the away-step length; also stands in for an unbounded step.
pub const AWAY_STEP_CAP: f64 = 1e6;

/// A vertex of the capped simplex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Vertex {
    Origin,
    Unit(usize),
}

impl Vertex {
    pub fn to_vector(self, dim: usize) -> DVector<f64> {
        let mut v = DVector::zeros(dim);
        if let Vertex::Unit(i) = self {
            v[i] = 1.0;
        }
        v
    }

    #[inline]
    fn linear_value(self, g: &DVector<f64>) -> f64 {
        match self {
            Vertex::Origin => 0.0,
            Vertex::Unit(i) => g[i],
        }
    }

    #[inline]
    fn coord(self, z: &DVector<f64>) -> f64 {
        match self {
            Vertex::Origin => 0.0,
            Vertex::Unit(i) => z[i],
        }
    }

    fn is_unit(self) -> f64 {
        match self {
            Vertex::Origin => 0.0,
            Vertex::Unit(_) => 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StepKind {
    /// `d = v - z`.
    Toward,
    /// `d = z - v`.
    Away,
}

/// A search direction described by its vertex, so that it never has to be
/// materialized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Direction {
    pub kind: StepKind,
    pub vertex: Vertex,
    /// `g'd`.
    pub slope: f64,
    /// `||d||^2`.
    pub norm_sq: f64,
    /// Largest feasible step.
    pub alpha_max: f64,
}

impl Direction {
    pub fn to_vector(&self, z: &DVector<f64>) -> DVector<f64> {
        let v = self.vertex.to_vector(z.len());
        match self.kind {
            StepKind::Toward => v - z,
            StepKind::Away => z - v,
        }
    }
}

/// `||v - z||^2` from the cached `||z||^2`.
fn distance_sq(st: &IterateState, v: Vertex) -> f64 {
    (st.norm_sq() - 2.0 * v.coord(st.z()) + v.is_unit()).max(0.0)
}

/// Linear minimization over the vertices `0, e_1, ..., e_dim`.
///
/// Ties go to the origin first, then to the lowest index. The returned
/// slope is the Frank-Wolfe gap `g'(v - z) <= 0`.
pub fn toward_step(st: &IterateState, g: &DVector<f64>) -> Direction {
    let mut vertex = Vertex::Origin;
    let mut best = 0.0;
    for (i, &gi) in g.iter().enumerate() {
        if gi < best {
            best = gi;
            vertex = Vertex::Unit(i);
        }
    }
    let gz = g.dot(st.z());
    Direction {
        kind: StepKind::Toward,
        vertex,
        slope: (best - gz).min(0.0),
        norm_sq: distance_sq(st, vertex),
        alpha_max: 1.0,
    }
}

/// Linear maximization over the origin and the support vertices of `z`.
///
/// Ties go to the lowest index; the origin only wins strictly. The origin
/// is a candidate only while its own step `(1 - 1'z) / 1'z` exceeds `beta`:
/// on the face `1'z = 1` it carries no weight and moving away from it is
/// a null step.
pub fn away_step(st: &IterateState, g: &DVector<f64>, beta: f64) -> Direction {
    let z = st.z();
    let s = st.sum_z();
    let origin_active = s <= 0.0 || (1.0 - s) / s > beta;
    let mut candidate: Option<(usize, f64)> = None;
    for (i, (&gi, &zi)) in g.iter().zip(z.iter()).enumerate() {
        if zi > 0.0 && candidate.is_none_or(|(_, best)| gi > best) {
            candidate = Some((i, gi));
        }
    }
    let vertex = match candidate {
        Some((i, gi)) if gi >= 0.0 || !origin_active => Vertex::Unit(i),
        _ => Vertex::Origin,
    };
    let alpha_max = match vertex {
        Vertex::Unit(i) if z[i] < 1.0 => z[i] / (1.0 - z[i]),
        Vertex::Origin if st.sum_z() > 0.0 => (1.0 - st.sum_z()).max(0.0) / st.sum_z(),
        _ => AWAY_STEP_CAP,
    }
    .min(AWAY_STEP_CAP);
    let gz = g.dot(z);
    Direction {
        kind: StepKind::Away,
        vertex,
        slope: gz - vertex.linear_value(g),
        norm_sq: distance_sq(st, vertex),
        alpha_max,
    }
}

/// Picks the away step when `g'd_AS <= g'd_TS` and `alpha_AS > beta`.
pub fn choose_direction(toward: Direction, away: Direction, beta: f64) -> Direction {
    if away.slope <= toward.slope && away.alpha_max > beta {
        away
    } else {
        toward
    }
}
