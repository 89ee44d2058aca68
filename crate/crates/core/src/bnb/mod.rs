//! Depth-first branch-and-bound over integer value fixings.
//!
//! Each node fixes one more integer variable to a value. Children of a node
//! are enumerated by distance of the fixing value to the parent's relaxation
//! value, so the relaxation bounds along each side are nondecreasing and
//! once a child is pruned by bound the rest of its side can be skipped. Node
//! relaxations are solved by the Frank-Wolfe method in [`crate::fw`] and may
//! stop early as soon as their dual bound reaches the incumbent.

mod branching;
mod heuristic;
mod warmstart;

pub use branching::{is_integral_on_free, select_branching_variable, ChildEnumerator, Side, INTEGRALITY_TOL};
pub use heuristic::{greedy_upper_bound, Incumbent, IncumbentSource};
pub use warmstart::{greedy_vertex, warmstart_point, WarmstartRule};

use std::time::{Duration, Instant};

use log::{debug, warn};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fw::{
    origin_check, point_better_than_origin, solve_relaxation, solve_relaxation_traced, FwConfig,
    OriginVerdict, RelaxationStatus, RelaxationTrace, TraceAudit,
};
use crate::model::{FixedSubproblem, MeanRiskInstance, RiskWeighting, SimplexProblem};

/// Remaining budgets below this fraction of the original count as exhausted.
const BUDGET_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnbConfig {
    pub fw: FwConfig,
    pub warmstart: WarmstartRule,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    /// Nodes are pruned once their bound reaches `incumbent - abs_tol`.
    pub abs_tol: f64,
    /// Skip the rest of a side after a child on it is pruned by bound.
    pub sibling_pruning: bool,
    /// Record relaxation traces and bound data in the report.
    pub audit: bool,
}

impl Default for BnbConfig {
    fn default() -> Self {
        BnbConfig {
            fw: FwConfig::default(),
            warmstart: WarmstartRule::XOrProj,
            time_limit: 3600.0,
            abs_tol: 1e-10,
            sibling_pruning: true,
            audit: false,
        }
    }
}

impl BnbConfig {
    pub fn validate(&self) -> Result<()> {
        self.fw.validate()?;
        if !(self.time_limit > 0.0) {
            return Err(Error::InvalidConfig("time_limit must be positive".into()));
        }
        if !(self.abs_tol >= 0.0) {
            return Err(Error::InvalidConfig("abs_tol must be nonnegative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SolveStatus {
    Optimal,
    TimeLimit,
}

/// Data collected when [`BnbConfig::audit`] is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditLog {
    pub relaxations: TraceAudit,
    /// Dual bound of every node pruned by bound.
    pub pruned_bounds: Vec<f64>,
    /// Incumbent value after every improvement, starting with the initial one.
    pub incumbent_history: Vec<f64>,
    /// Nodes whose origin check was run, and how many found the origin optimal.
    pub origin_checks: usize,
    pub origin_optimal: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Objective `r'y - h(sqrt(y'My))` of `y`.
    pub objective_max: f64,
    pub y: Vec<f64>,
    pub nodes: usize,
    pub fw_iters_total: usize,
    pub wall_time: f64,
    /// `r'y`.
    pub return_term: f64,
    /// Entries of `y` above 1e-9 in magnitude.
    pub nnz: usize,
    pub max_entry: f64,
    pub risk: RiskWeighting,
    pub warmstart: WarmstartRule,
    pub incumbent_source: IncumbentSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub audit: Option<AuditLog>,
}

enum NodeOutcome {
    Pruned,
    Fathomed,
    Branch {
        pos: usize,
        x_star: DVector<f64>,
        /// Whether the relaxation was solved to optimality, which the
        /// monotone-bound argument behind sibling cuts needs.
        exact: bool,
    },
}

struct Frame {
    sub: FixedSubproblem,
    pos: usize,
    x_star: DVector<f64>,
    children: ChildEnumerator,
    cut_allowed: bool,
}

struct Search<'a> {
    inst: &'a MeanRiskInstance,
    h: RiskWeighting,
    cfg: &'a BnbConfig,
    incumbent: Incumbent,
    nodes: usize,
    fw_iters: usize,
    audit: Option<AuditLog>,
}

impl Search<'_> {
    fn threshold(&self) -> f64 {
        self.incumbent.value_min - self.cfg.abs_tol
    }

    fn offer(&mut self, y: Vec<f64>) {
        if !self.inst.is_feasible(&y, 1e-9) {
            debug!("discarding infeasible candidate");
            return;
        }
        let value = self.inst.objective(&self.h, &y);
        if value < self.incumbent.value_min {
            debug!("incumbent {:.12e} -> {value:.12e} at node {}", self.incumbent.value_min, self.nodes);
            self.incumbent = Incumbent {
                y_best: y,
                value_min: value,
                source: IncumbentSource::Leaf,
            };
            if let Some(a) = self.audit.as_mut() {
                a.incumbent_history.push(value);
            }
        }
    }

    fn pruned(&mut self, bound: f64) -> NodeOutcome {
        if let Some(a) = self.audit.as_mut() {
            a.pruned_bounds.push(bound);
        }
        NodeOutcome::Pruned
    }

    /// Starting point for a relaxation with `d = 0`, or `None` when the
    /// origin solves it.
    fn start_near_singular_origin(&mut self, p: &SimplexProblem, z0: DVector<f64>) -> Option<DVector<f64>> {
        let f0 = p.origin_value();
        if p.eval_f(&z0) < f0 {
            return Some(z0);
        }
        let dim = p.dim();
        let best_vertex = (0..dim)
            .map(|i| {
                let mut e = DVector::zeros(dim);
                e[i] = 1.0;
                (p.eval_f(&e), e)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0));
        if let Some((fv, e)) = best_vertex {
            if fv < f0 {
                return Some(e);
            }
        }
        let check = origin_check(p);
        if let Some(a) = self.audit.as_mut() {
            a.origin_checks += 1;
        }
        if check.verdict == OriginVerdict::OriginOptimal {
            if let Some(a) = self.audit.as_mut() {
                a.origin_optimal += 1;
            }
            return None;
        }
        match point_better_than_origin(p, &check) {
            Some(z) => Some(z),
            None => {
                warn!("origin check reported a descent direction but no better point was found; treating the origin as optimal");
                None
            }
        }
    }

    fn process(&mut self, sub: &FixedSubproblem, parent: Option<&DVector<f64>>) -> Result<NodeOutcome> {
        self.nodes += 1;
        let threshold = self.threshold();

        if sub.dim() == 0 || sub.b() <= BUDGET_EPS * self.inst.b() {
            // every free variable is forced to zero
            let x = vec![0.0; sub.dim()];
            let value = sub.objective(&self.h, &x);
            if value >= threshold {
                return Ok(self.pruned(value));
            }
            self.offer(sub.assemble(&x));
            return Ok(NodeOutcome::Fathomed);
        }

        let p = SimplexProblem::from_subproblem(sub, self.h)?;
        let mut z0 = warmstart_point(self.cfg.warmstart, &p, sub, parent);
        if p.d() <= 0.0 {
            match self.start_near_singular_origin(&p, z0) {
                Some(z) => z0 = z,
                None => {
                    let f0 = p.origin_value();
                    if f0 >= threshold {
                        return Ok(self.pruned(f0));
                    }
                    return self.after_relaxation(sub, &p, DVector::zeros(p.dim()), RelaxationStatus::OriginOptimal);
                }
            }
        }

        let res = if self.audit.is_some() {
            let mut trace = RelaxationTrace::default();
            let res = solve_relaxation_traced(&p, &z0, Some(threshold), &self.cfg.fw, &mut trace)?;
            if let Some(a) = self.audit.as_mut() {
                a.relaxations.record(&trace, &res, &self.cfg.fw);
            }
            res
        } else {
            solve_relaxation(&p, &z0, Some(threshold), &self.cfg.fw)?
        };
        self.fw_iters += res.iters;
        if res.status == RelaxationStatus::PrunedByBound || res.dual_bound >= threshold {
            return Ok(self.pruned(res.dual_bound));
        }
        self.after_relaxation(sub, &p, res.z_star, res.status)
    }

    fn after_relaxation(
        &mut self,
        sub: &FixedSubproblem,
        p: &SimplexProblem,
        z_star: DVector<f64>,
        status: RelaxationStatus,
    ) -> Result<NodeOutcome> {
        let x_star = p.to_original(&z_star);
        let exact = matches!(status, RelaxationStatus::Optimal | RelaxationStatus::OriginOptimal);
        if !sub.has_free_integers() {
            self.offer(sub.assemble(x_star.as_slice()));
            return Ok(NodeOutcome::Fathomed);
        }
        if exact && is_integral_on_free(sub, x_star.as_slice()) {
            let mut x = x_star.clone();
            for pos in sub.free_integer_positions() {
                x[pos] = x[pos].round();
            }
            let y = sub.assemble(x.as_slice());
            if self.inst.is_feasible(&y, 1e-9) {
                self.offer(y);
                return Ok(NodeOutcome::Fathomed);
            }
        }
        match select_branching_variable(sub, x_star.as_slice()) {
            Some(pos) => Ok(NodeOutcome::Branch { pos, x_star, exact }),
            None => unreachable!("free integer positions exist"),
        }
    }
}

/// Solves the mixed-integer problem to optimality (up to `abs_tol`) or until
/// the time limit.
pub fn solve(inst: &MeanRiskInstance, h: &RiskWeighting, cfg: &BnbConfig) -> Result<SolveReport> {
    h.validate()?;
    cfg.validate()?;
    let start = Instant::now();
    let limit = Duration::from_secs_f64(cfg.time_limit.min(1e9));

    let greedy = greedy_upper_bound(inst, h);
    let zero = Incumbent {
        y_best: vec![0.0; inst.n()],
        value_min: inst.objective(h, &vec![0.0; inst.n()]),
        source: IncumbentSource::Heuristic,
    };
    let incumbent = if greedy.value_min < zero.value_min { greedy } else { zero };
    let audit = cfg.audit.then(|| AuditLog {
        relaxations: TraceAudit::new(),
        pruned_bounds: Vec::new(),
        incumbent_history: vec![incumbent.value_min],
        origin_checks: 0,
        origin_optimal: 0,
    });
    let mut search = Search {
        inst,
        h: *h,
        cfg,
        incumbent,
        nodes: 0,
        fw_iters: 0,
        audit,
    };

    let mut status = SolveStatus::Optimal;
    let mut stack: Vec<Frame> = Vec::new();
    let root = FixedSubproblem::root(inst);
    if let NodeOutcome::Branch { pos, x_star, exact } = search.process(&root, None)? {
        stack.push(frame(root, pos, x_star, exact, cfg));
    }
    while let Some(top) = stack.last_mut() {
        if start.elapsed() >= limit {
            status = SolveStatus::TimeLimit;
            break;
        }
        let Some((value, side)) = top.children.next() else {
            stack.pop();
            continue;
        };
        let child = top.sub.fix_variable(top.pos, value)?;
        let keep: Vec<usize> = (0..top.x_star.len()).filter(|&k| k != top.pos).collect();
        let parent_x = top.x_star.select_rows(&keep);
        let cut_allowed = top.cut_allowed;
        match search.process(&child, Some(&parent_x))? {
            NodeOutcome::Pruned => {
                if cut_allowed {
                    if let Some(top) = stack.last_mut() {
                        top.children.cut(side);
                    }
                }
            }
            NodeOutcome::Fathomed => {}
            NodeOutcome::Branch { pos, x_star, exact } => {
                stack.push(frame(child, pos, x_star, exact, cfg));
            }
        }
    }

    let y = search.incumbent.y_best.clone();
    let return_term = inst.r().iter().zip(&y).map(|(r, v)| r * v).sum();
    Ok(SolveReport {
        status,
        objective_max: 0.0 - search.incumbent.value_min,
        nnz: y.iter().filter(|v| v.abs() > 1e-9).count(),
        max_entry: y.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        y,
        nodes: search.nodes,
        fw_iters_total: search.fw_iters,
        wall_time: start.elapsed().as_secs_f64(),
        return_term,
        risk: *h,
        warmstart: cfg.warmstart,
        incumbent_source: search.incumbent.source,
        audit: search.audit,
    })
}

fn frame(sub: FixedSubproblem, pos: usize, x_star: DVector<f64>, exact: bool, cfg: &BnbConfig) -> Frame {
    let children = ChildEnumerator::new(x_star[pos], sub.max_value(pos));
    Frame {
        sub,
        pos,
        x_star,
        children,
        cut_allowed: exact && cfg.sibling_pruning,
    }
}
