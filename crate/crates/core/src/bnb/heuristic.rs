use serde::{Deserialize, Serialize};

use crate::model::{max_copies, MeanRiskInstance, RiskWeighting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IncumbentSource {
    Heuristic,
    Leaf,
}

/// Best feasible point found so far, in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Incumbent {
    pub y_best: Vec<f64>,
    /// Objective in minimization form.
    pub value_min: f64,
    pub source: IncumbentSource,
}

/// Greedy knapsack fill by the ratios
/// `p_i = (h(sqrt(m_ii + 2 sum_{j != i} m_ij)) - r_i) / a_i`.
///
/// Items are taken in nondecreasing order of `p_i` while `p_i < 0`, integer
/// items with as many copies as fit, continuous items with the whole
/// remaining budget. Stops once the remaining budget is below every
/// remaining price.
pub fn greedy_upper_bound(inst: &MeanRiskInstance, h: &RiskWeighting) -> Incumbent {
    let n = inst.n();
    let m = inst.m();
    let ratio: Vec<f64> = (0..n)
        .map(|i| {
            let off: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
            let t = (m[(i, i)] + 2.0 * off).max(0.0).sqrt();
            (h.eval(t) - inst.r()[i]) / inst.a()[i]
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| ratio[i].total_cmp(&ratio[j]));

    let mut y = vec![0.0; n];
    let mut budget = inst.b();
    for (k, &i) in order.iter().enumerate() {
        if ratio[i] >= 0.0 {
            break;
        }
        let cheapest = order[k..]
            .iter()
            .map(|&j| inst.a()[j])
            .fold(f64::INFINITY, f64::min);
        if budget < cheapest {
            break;
        }
        let ai = inst.a()[i];
        if inst.is_integer(i) {
            let copies = max_copies(budget, ai);
            y[i] = copies as f64;
            budget = (budget - y[i] * ai).max(0.0);
        } else {
            y[i] = budget / ai;
            budget = 0.0;
        }
    }
    Incumbent {
        value_min: inst.objective(h, &y),
        y_best: y,
        source: IncumbentSource::Heuristic,
    }
}
