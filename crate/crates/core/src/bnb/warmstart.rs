use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::model::{FixedSubproblem, RiskWeighting, SimplexProblem};
use crate::projection::project_capped_simplex;

/// Starting-point rule for node relaxations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarmstartRule {
    /// Always `e_1`.
    E1,
    /// Always the greedy vertex `e_î`.
    #[serde(rename = "ehat")]
    EHat,
    /// Parent solution if feasible, else `e_1`.
    #[serde(rename = "x-e1")]
    XOrE1,
    /// Parent solution if feasible, else its projection onto the simplex.
    #[serde(rename = "x-proj")]
    XOrProj,
    /// Parent solution if feasible, else `e_î`.
    #[serde(rename = "x-ehat")]
    XOrEHat,
}

impl WarmstartRule {
    pub const ALL: [WarmstartRule; 5] = [
        WarmstartRule::E1,
        WarmstartRule::EHat,
        WarmstartRule::XOrE1,
        WarmstartRule::XOrProj,
        WarmstartRule::XOrEHat,
    ];

    pub fn name(self) -> &'static str {
        match self {
            WarmstartRule::E1 => "e1",
            WarmstartRule::EHat => "ehat",
            WarmstartRule::XOrE1 => "x-e1",
            WarmstartRule::XOrProj => "x-proj",
            WarmstartRule::XOrEHat => "x-ehat",
        }
    }

    fn uses_parent(self) -> bool {
        matches!(
            self,
            WarmstartRule::XOrE1 | WarmstartRule::XOrProj | WarmstartRule::XOrEHat
        )
    }
}

impl fmt::Display for WarmstartRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for WarmstartRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        WarmstartRule::ALL
            .into_iter()
            .find(|r| r.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown warmstart rule '{s}'")))
    }
}

/// Free position minimizing `h(sqrt(m_ii + 2 sum_{j != i} m_ij)) - r_i` on the
/// subproblem data, lowest index on ties.
pub fn greedy_vertex(sub: &FixedSubproblem, h: &RiskWeighting) -> usize {
    let m = sub.m();
    let dim = sub.dim();
    let mut best = (0, f64::INFINITY);
    for i in 0..dim {
        let off: f64 = (0..dim).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        let v = h.eval((m[(i, i)] + 2.0 * off).max(0.0).sqrt()) - sub.r()[i];
        if v < best.1 {
            best = (i, v);
        }
    }
    best.0
}

fn unit(dim: usize, i: usize) -> DVector<f64> {
    let mut e = DVector::zeros(dim);
    e[i] = 1.0;
    e
}

/// Starting point in simplex coordinates of `p`.
///
/// `parent` is the parent's relaxation solution restricted to the free
/// variables of `sub`, in original units. Rules that use it return the
/// rescaled point when it lies in the simplex (clipped), and their fallback
/// otherwise. Without a parent, as at the root, `e_î` rules start from
/// `e_î` and all others from `e_1`.
pub fn warmstart_point(
    rule: WarmstartRule,
    p: &SimplexProblem,
    sub: &FixedSubproblem,
    parent: Option<&DVector<f64>>,
) -> DVector<f64> {
    let dim = p.dim();
    let rescaled = parent.map(|x| p.from_original(x));
    if rule.uses_parent() {
        if let Some(z) = &rescaled {
            if z.iter().all(|&v| v >= -1e-14) && z.sum() <= 1.0 + 1e-12 {
                let z = z.map(|v| v.max(0.0));
                let s = z.sum();
                return if s > 1.0 { z / s } else { z };
            }
        }
    }
    match (rule, rescaled) {
        (WarmstartRule::XOrProj, Some(z)) => project_capped_simplex(&z),
        (WarmstartRule::EHat | WarmstartRule::XOrEHat, _) => unit(dim, greedy_vertex(sub, p.h())),
        _ => unit(dim, 0),
    }
}
