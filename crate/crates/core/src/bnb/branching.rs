use serde::{Deserialize, Serialize};

use crate::model::FixedSubproblem;

/// Distance below which a relaxation value counts as integral.
pub const INTEGRALITY_TOL: f64 = 1e-9;

/// Most fractional free integer position of `x_star` (reduced positions),
/// lowest index on ties. Falls back to the first free integer position when
/// all are integral; `None` when every integer variable is fixed.
pub fn select_branching_variable(sub: &FixedSubproblem, x_star: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for pos in sub.free_integer_positions() {
        let f = x_star[pos] - x_star[pos].floor();
        let score = f * (1.0 - f);
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((pos, score));
        }
    }
    best.map(|(pos, _)| pos)
}

/// Whether every free integer position of `x` is within [`INTEGRALITY_TOL`] of an integer.
pub fn is_integral_on_free(sub: &FixedSubproblem, x: &[f64]) -> bool {
    sub.free_integer_positions()
        .all(|pos| (x[pos] - x[pos].round()).abs() <= INTEGRALITY_TOL)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Down,
    Up,
}

/// Lazy child values `floor(y), floor(y) + 1, floor(y) - 1, ...` ordered by
/// distance to `y` (half rounds down), clipped to `[0, max]`. A side can be
/// cut once a child on it is pruned by bound.
#[derive(Debug, Clone)]
pub struct ChildEnumerator {
    down: Option<i64>,
    up: Option<i64>,
    max: i64,
    prefer: Side,
}

impl ChildEnumerator {
    pub fn new(y_star: f64, max: i64) -> Self {
        let y = y_star.clamp(0.0, max as f64);
        let floor = (y.floor() as i64).min(max);
        let frac = y - floor as f64;
        let up = floor + 1;
        ChildEnumerator {
            down: Some(floor),
            up: (up <= max).then_some(up),
            max,
            prefer: if frac <= 0.5 { Side::Down } else { Side::Up },
        }
    }

    /// Skips all remaining values on `side`.
    pub fn cut(&mut self, side: Side) {
        match side {
            Side::Down => self.down = None,
            Side::Up => self.up = None,
        }
    }

    fn take(&mut self, side: Side) -> Option<(i64, Side)> {
        match side {
            Side::Down => {
                let v = self.down?;
                self.down = (v > 0).then_some(v - 1);
                Some((v, Side::Down))
            }
            Side::Up => {
                let v = self.up?;
                self.up = (v < self.max).then_some(v + 1);
                Some((v, Side::Up))
            }
        }
    }
}

impl Iterator for ChildEnumerator {
    type Item = (i64, Side);

    fn next(&mut self) -> Option<Self::Item> {
        let (first, second) = match self.prefer {
            Side::Down => (Side::Down, Side::Up),
            Side::Up => (Side::Up, Side::Down),
        };
        let item = self.take(first).or_else(|| self.take(second))?;
        self.prefer = match item.1 {
            Side::Down => Side::Up,
            Side::Up => Side::Down,
        };
        Some(item)
    }
}
