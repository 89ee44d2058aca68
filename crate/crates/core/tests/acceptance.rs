//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Runs as a plain binary so the lines always print.

mod support;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use fwbb::bnb::{solve, BnbConfig, WarmstartRule};
use fwbb::fw::{
    origin_check, solve_relaxation_traced, FwConfig, OriginVerdict, RelaxationStatus, RelaxationTrace, TraceAudit,
};
use fwbb::generate::generate_instance;
use fwbb::harness::{performance_profile, run_bench, write_records_csv, BenchGrid, RiskSpec, SolverSpec};
use fwbb::model::{FixedSubproblem, MeanRiskInstance, RiskWeighting, SimplexProblem};
use fwbb::oracle::oracle_solve;
use fwbb::projection::project_capped_simplex;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

const OBJ_REL_TOL: f64 = 1e-6;
const FEAS_TOL: f64 = 1e-9;
const GAP_TOL: f64 = 1e-10;
const CLOSED_FORM_TOL: f64 = 1e-6;
const DUAL_TOL: f64 = 1e-10;
const CACHE_TOL: f64 = 1e-9;
const MAX_HALVINGS: usize = 200;
const PROJ_TOL: f64 = 1e-10;
const PROJ_PROPERTY_TOL: f64 = 1e-12;
const WARMSTART_TOL: f64 = 1e-8;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rel(x: f64, reference: f64) -> f64 {
    (x - reference).abs() / reference.abs().max(1.0)
}

fn audit_cfg(fw: FwConfig) -> BnbConfig {
    BnbConfig {
        fw,
        audit: true,
        ..BnbConfig::default()
    }
}

fn monotone() -> FwConfig {
    FwConfig {
        p_nm: 0,
        ..FwConfig::default()
    }
}

/// End-to-end runs on the oracle family, with audit data kept for the
/// invariant criteria.
struct EndToEnd {
    cases: usize,
    worst_rel: f64,
    mismatches: Vec<String>,
    infeasible: usize,
    audit: TraceAudit,
    monotone_audit: TraceAudit,
}

fn end_to_end() -> EndToEnd {
    let mut out = EndToEnd {
        cases: 0,
        worst_rel: 0.0,
        mismatches: Vec::new(),
        infeasible: 0,
        audit: TraceAudit::new(),
        monotone_audit: TraceAudit::new(),
    };
    for (seed, inst) in support::oracle_family() {
        for h in support::risks() {
            out.cases += 1;
            let o = oracle_solve(&inst, &h).expect("oracle-eligible instance");
            let rep = solve(&inst, &h, &audit_cfg(FwConfig::default())).unwrap();
            let d = rel(rep.objective_max, o.objective_max);
            out.worst_rel = out.worst_rel.max(d);
            if d > OBJ_REL_TOL {
                out.mismatches.push(format!("seed {seed} {}", h.label()));
            }
            if !inst.is_feasible(&rep.y, FEAS_TOL) {
                out.infeasible += 1;
            }
            out.audit.merge(&rep.audit.unwrap().relaxations);

            let mono = solve(&inst, &h, &audit_cfg(monotone())).unwrap();
            if rel(mono.objective_max, o.objective_max) > OBJ_REL_TOL {
                out.mismatches.push(format!("seed {seed} {} monotone", h.label()));
            }
            out.monotone_audit.merge(&mono.audit.unwrap().relaxations);
        }
    }
    out
}

fn criterion_1(e: &EndToEnd) -> Verdict {
    verdict(
        e.mismatches.is_empty() && e.infeasible == 0,
        format!(
            "{} cases, worst rel diff {:.2e}, {} mismatches {:?}, {} infeasible or fractional",
            e.cases,
            e.worst_rel,
            e.mismatches.len(),
            e.mismatches.iter().take(5).collect::<Vec<_>>(),
            e.infeasible
        ),
    )
}

/// Continuous solver runs on 50 seeded problems.
struct Continuous {
    problems: usize,
    not_optimal: Vec<String>,
    min_gap: f64,
    closed_form_checked: usize,
    worst_closed_form: f64,
    audit: TraceAudit,
    monotone_audit: TraceAudit,
}

fn continuous_problem(i: usize) -> (SimplexProblem, Option<DVector<f64>>) {
    let dim = [5, 20, 50][i % 3];
    let mut rng = support::rng(5000 + i as u64);
    match i % 5 {
        0 => {
            let (p, z) = support::interior_quadratic(&mut rng, dim);
            (p, Some(z))
        }
        1 => (support::relaxation(&mut rng, dim, RiskWeighting::Quadratic { omega: 1.0 }, false), None),
        2 => (support::relaxation(&mut rng, dim, RiskWeighting::Quadratic { omega: 0.5 }, true), None),
        3 => (support::relaxation(&mut rng, dim, RiskWeighting::ExpThreshold { gamma: 0.5 }, true), None),
        _ => (support::relaxation(&mut rng, dim, RiskWeighting::Linear { omega: 0.3 }, true), None),
    }
}

fn continuous() -> Continuous {
    let mut out = Continuous {
        problems: 0,
        not_optimal: Vec::new(),
        min_gap: f64::INFINITY,
        closed_form_checked: 0,
        worst_closed_form: 0.0,
        audit: TraceAudit::new(),
        monotone_audit: TraceAudit::new(),
    };
    let cfg = FwConfig {
        gap_tol: GAP_TOL,
        ..FwConfig::default()
    };
    for i in 0..50 {
        let (p, z_closed) = continuous_problem(i);
        let z0 = DVector::from_element(p.dim(), 1.0 / p.dim() as f64);
        out.problems += 1;

        let mut trace = RelaxationTrace::default();
        let res = solve_relaxation_traced(&p, &z0, None, &cfg, &mut trace).unwrap();
        out.audit.record(&trace, &res, &cfg);
        if res.status != RelaxationStatus::Optimal {
            out.not_optimal.push(format!("#{i} dim {} {:?}", p.dim(), res.status));
        }
        out.min_gap = out.min_gap.min(res.last_gap);
        if let Some(z) = z_closed {
            out.closed_form_checked += 1;
            out.worst_closed_form = out.worst_closed_form.max((&res.z_star - z).amax());
        }

        let mono = monotone();
        let mut trace = RelaxationTrace::default();
        let res = solve_relaxation_traced(&p, &z0, None, &mono, &mut trace).unwrap();
        out.monotone_audit.record(&trace, &res, &mono);
    }
    out
}

fn criterion_2(c: &Continuous) -> Verdict {
    verdict(
        c.not_optimal.is_empty() && c.min_gap >= -GAP_TOL && c.worst_closed_form <= CLOSED_FORM_TOL,
        format!(
            "{} problems, {} not optimal {:?}, min final gap {:.2e}, {} closed-form checks with max |z - z*| {:.2e}",
            c.problems,
            c.not_optimal.len(),
            c.not_optimal.iter().take(5).collect::<Vec<_>>(),
            c.min_gap,
            c.closed_form_checked,
            c.worst_closed_form
        ),
    )
}

fn criterion_3(c: &Continuous) -> Verdict {
    let worst = c.audit.max_dual_excess.max(c.monotone_audit.max_dual_excess);
    verdict(
        worst <= DUAL_TOL,
        format!("max dual bound minus final value {worst:.2e} over {} runs", c.audit.runs + c.monotone_audit.runs),
    )
}

fn all_audits<'a>(e: &'a EndToEnd, c: &'a Continuous) -> [&'a TraceAudit; 4] {
    [&e.audit, &e.monotone_audit, &c.audit, &c.monotone_audit]
}

fn criterion_4(e: &EndToEnd, c: &Continuous) -> Verdict {
    let a = all_audits(e, c);
    let worst = a.iter().map(|x| x.max_cache_drift).fold(0.0, f64::max);
    let runs: usize = a.iter().map(|x| x.runs).sum();
    verdict(worst <= CACHE_TOL, format!("max relative cache drift {worst:.2e} over {runs} relaxations"))
}

fn criterion_5(e: &EndToEnd, c: &Continuous) -> Verdict {
    let a = all_audits(e, c);
    let violations: usize = a.iter().map(|x| x.acceptance_violations).sum();
    let steps: usize = a.iter().map(|x| x.steps).sum();
    let halvings = a.iter().map(|x| x.max_backtracks).max().unwrap_or(0);
    let stalls: usize = a.iter().map(|x| x.stalls).sum();
    verdict(
        violations == 0 && halvings <= MAX_HALVINGS && stalls == 0,
        format!("{steps} steps, {violations} acceptance violations, max {halvings} halvings, {stalls} stalls"),
    )
}

fn criterion_6(e: &EndToEnd, c: &Continuous) -> Verdict {
    let a = all_audits(e, c);
    let increases: usize = a.iter().map(|x| x.f_bar_increases).sum();
    let mono_steps = e.monotone_audit.steps + c.monotone_audit.steps;
    let mono_bad = e.monotone_audit.monotone_violations + c.monotone_audit.monotone_violations;
    verdict(
        increases == 0 && mono_bad == 0 && mono_steps > 0,
        format!("{increases} reference-value increases; monotone mode {mono_bad} non-decreasing of {mono_steps} steps"),
    )
}

/// Closest point of the capped simplex over every support and budget
/// status whose stationary point is feasible.
fn projection_oracle(v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    let mut best = DVector::zeros(n);
    let mut best_dist = v.norm_squared();
    for mask in 1u32..(1 << n) {
        let support: Vec<usize> = (0..n).filter(|&i| mask & (1 << i) != 0).collect();
        let sum: f64 = support.iter().map(|&i| v[i]).sum();
        let shifts = [0.0, (sum - 1.0) / support.len() as f64];
        for tau in shifts {
            let mut z = DVector::zeros(n);
            for &i in &support {
                z[i] = v[i] - tau;
            }
            if z.min() < 0.0 || z.sum() > 1.0 + 1e-12 {
                continue;
            }
            let dist = (v - &z).norm_squared();
            if dist < best_dist {
                best_dist = dist;
                best = z;
            }
        }
    }
    best
}

fn criterion_7() -> Verdict {
    let mut rng = support::rng(7000);
    let mut worst_oracle = 0.0f64;
    let mut worst_idem = 0.0f64;
    let mut worst_expansion = f64::NEG_INFINITY;
    let mut prev: Option<(DVector<f64>, DVector<f64>)> = None;
    for k in 0..1000 {
        let dim = rng.random_range(1..=12);
        let scale = [0.05, 0.5, 1.0, 5.0][k % 4];
        let shift: f64 = rng.random_range(-0.2..0.4);
        let v = DVector::from_fn(dim, |_, _| shift + scale * rng.sample::<f64, _>(StandardNormal));
        let p = project_capped_simplex(&v);
        worst_oracle = worst_oracle.max((&p - projection_oracle(&v)).amax());
        worst_idem = worst_idem.max((project_capped_simplex(&p) - &p).amax());
        if let Some((u, pu)) = prev.as_ref().filter(|(u, _)| u.len() == dim) {
            worst_expansion = worst_expansion.max((&p - pu).norm() - (&v - u).norm());
        }
        // a nearby second point makes the expansion check informative
        let w = &v + DVector::from_fn(dim, |_, _| 0.1 * rng.sample::<f64, _>(StandardNormal));
        let pw = project_capped_simplex(&w);
        worst_expansion = worst_expansion.max((&pw - &p).norm() - (&w - &v).norm());
        prev = Some((v, p));
    }
    verdict(
        worst_oracle <= PROJ_TOL && worst_idem <= PROJ_PROPERTY_TOL && worst_expansion <= PROJ_PROPERTY_TOL,
        format!(
            "1000 vectors: max oracle diff {worst_oracle:.2e}, idempotence {worst_idem:.2e}, expansion {worst_expansion:.2e}"
        ),
    )
}

/// Sign of the minimal slope `h'(0) sqrt(d'Qd) - mu'd` over a dense grid
/// of directions on the face `1'd = 1`. `None` when the grid cannot decide.
fn grid_origin_verdict(p: &SimplexProblem) -> Option<OriginVerdict> {
    const STEPS: usize = 600;
    const MARGIN: f64 = 2e-2;
    let slope0 = p.h().deriv(0.0);
    let mut min_slope = f64::INFINITY;
    for i in 0..=STEPS {
        for j in 0..=(STEPS - i) {
            let d = DVector::from_vec(vec![i as f64, j as f64, (STEPS - i - j) as f64]) / STEPS as f64;
            let s = slope0 * (p.q() * &d).dot(&d).sqrt() - p.mu().dot(&d);
            min_slope = min_slope.min(s);
        }
    }
    if min_slope > MARGIN {
        Some(OriginVerdict::OriginOptimal)
    } else if min_slope < -MARGIN {
        Some(OriginVerdict::NotOptimal)
    } else {
        None
    }
}

fn criterion_8() -> Verdict {
    let mut notes = Vec::new();
    let mut pass = true;

    // heavy linear risk: the origin is optimal and branch-and-bound keeps y = 0
    let heavy = RiskWeighting::Linear { omega: 1e3 };
    for (seed, n_int) in [(81u64, 0usize), (82, 2), (83, 4)] {
        let inst = support::small_instance(seed, 4, n_int);
        let p = SimplexProblem::from_subproblem(&FixedSubproblem::root(&inst), heavy).unwrap();
        let v = origin_check(&p).verdict;
        let rep = solve(&inst, &heavy, &BnbConfig::default()).unwrap();
        let zero = rep.y.iter().all(|&x| x == 0.0) && rep.objective_max == 0.0;
        pass &= v == OriginVerdict::OriginOptimal && zero;
        if v != OriginVerdict::OriginOptimal || !zero {
            notes.push(format!("heavy seed {seed}: {v:?}, y = {:?}", rep.y));
        }
    }

    // quadratic risk has zero slope at the origin: decided without the inner solve
    let mut quad_ok = 0;
    for seed in 0..10u64 {
        let inst = support::small_instance(8100 + seed, 5, 2);
        let p = SimplexProblem::from_subproblem(&FixedSubproblem::root(&inst), RiskWeighting::Quadratic { omega: 1.0 })
            .unwrap();
        let c = origin_check(&p);
        if c.verdict == OriginVerdict::NotOptimal && !c.solved {
            quad_ok += 1;
        }
    }
    pass &= quad_ok == 10;

    let mut rng = support::rng(8200);
    let (mut matched, mut decided, mut skipped, mut optimal) = (0, 0, 0, 0);
    while decided < 10 && decided + skipped < 200 {
        let q = support::spd(&mut rng, 3, 0.5, 3.0);
        let mu = DVector::from_fn(3, |_, _| rng.random_range(-0.5..1.0));
        let h = if rng.random_bool(0.5) {
            RiskWeighting::Linear { omega: rng.random_range(0.1..2.0) }
        } else {
            RiskWeighting::ExpThreshold { gamma: rng.random_range(0.1..2.0) }
        };
        let p = SimplexProblem::new(q, DVector::zeros(3), 0.0, mu, 0.0, h).unwrap();
        let Some(expected) = grid_origin_verdict(&p) else {
            skipped += 1;
            continue;
        };
        decided += 1;
        optimal += (expected == OriginVerdict::OriginOptimal) as usize;
        if origin_check(&p).verdict == expected {
            matched += 1;
        }
    }
    pass &= decided == 10 && matched == 10;
    notes.push(format!(
        "quadratic NotOptimal without inner solve {quad_ok}/10; grid oracle {matched}/{decided} match \
         ({optimal} origin-optimal, {skipped} ambiguous skipped)"
    ));
    verdict(pass, notes.join("; "))
}

/// Twenty assets with budget room for several units of each integer asset.
fn trend_instance() -> MeanRiskInstance {
    let mut rng = support::rng(9000);
    let n = 20;
    let f = DMatrix::from_fn(n, 3, |_, _| rng.random_range(-1.0..1.0));
    let mut m = &f * f.transpose() * 0.2;
    for i in 0..n {
        m[(i, i)] += rng.random_range(0.05..0.3);
    }
    let r: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..0.6)).collect();
    let a: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..2.0)).collect();
    MeanRiskInstance::new(r, a, 6.0, m, (0..n / 2).collect()).unwrap()
}

fn criterion_9() -> Verdict {
    let inst = trend_instance();
    let mut returns = Vec::new();
    for eps in [0.99, 0.95, 0.91] {
        let h = RiskWeighting::linear_from_confidence(eps).unwrap();
        let rep = solve(&inst, &h, &BnbConfig::default()).unwrap();
        returns.push((eps, rep.return_term, rep.status));
    }
    let optimal = returns.iter().all(|r| r.2 == fwbb::bnb::SolveStatus::Optimal);
    let ordered = returns.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-9);
    let varied = returns[0].1 > returns[2].1;
    verdict(
        optimal && ordered,
        format!(
            "return term {}{}",
            returns
                .iter()
                .map(|(e, r, _)| format!("eps {e}: {r:.6}"))
                .collect::<Vec<_>>()
                .join(", "),
            if varied { "" } else { " (no variation)" }
        ),
    )
}

fn criterion_10() -> Verdict {
    let instances: Vec<(String, MeanRiskInstance)> = (1..=3u64)
        .map(|s| (format!("gen-{s}"), generate_instance(8, 0.5, 1.0, s).unwrap()))
        .collect();
    let grid = BenchGrid {
        risks: [0.91, 0.95, 0.99].map(|epsilon| RiskSpec::Linear { epsilon }).to_vec(),
        budget_multipliers: vec![1.0, 10.0, 100.0],
        solvers: vec![
            SolverSpec { warmstart: WarmstartRule::XOrProj, monotone: false },
        ],
        time_limit: 60.0,
    };
    let records = run_bench(&instances, &grid, 2).unwrap();
    let mut buf = Vec::new();
    write_records_csv(&mut buf, &records).unwrap();
    let rows = String::from_utf8(buf).unwrap().lines().count() - 1;
    let profile = performance_profile(&records);
    let mut valid = !profile.is_empty();
    let mut last: Option<(&str, f64)> = None;
    for p in &profile {
        valid &= p.fraction_solved >= 0.0 && p.fraction_solved <= 1.0;
        if let Some((cfg, f)) = last {
            if cfg == p.solver_config {
                valid &= p.fraction_solved >= f;
            }
        }
        last = Some((&p.solver_config, p.fraction_solved));
    }
    let expected = instances.len() * 9;
    verdict(
        rows == expected && valid,
        format!("{rows} record rows (expected {expected}), profile of {} points valid: {valid}", profile.len()),
    )
}

fn criterion_11() -> Verdict {
    let mut worst = 0.0f64;
    let mut sibling_worst = 0.0f64;
    let mut cases = 0;
    for (_, inst) in support::oracle_family() {
        for h in support::risks() {
            let values: Vec<f64> = WarmstartRule::ALL
                .iter()
                .map(|&warmstart| {
                    let cfg = BnbConfig { warmstart, ..BnbConfig::default() };
                    solve(&inst, &h, &cfg).unwrap().objective_max
                })
                .collect();
            let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            worst = worst.max(hi - lo);
            let unpruned = BnbConfig { sibling_pruning: false, ..BnbConfig::default() };
            sibling_worst = sibling_worst.max((solve(&inst, &h, &unpruned).unwrap().objective_max - values[3]).abs());
            cases += 1;
        }
    }
    verdict(
        worst <= WARMSTART_TOL && sibling_worst <= WARMSTART_TOL,
        format!("{cases} cases, max spread over rules {worst:.2e}, sibling pruning on/off diff {sibling_worst:.2e}"),
    )
}

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        verdict(false, format!("panicked: {msg}"))
    })
}

fn main() -> ExitCode {
    let start = Instant::now();
    let (e2e, cont, independent) = std::thread::scope(|s| {
        let e2e = s.spawn(|| catch_unwind(end_to_end));
        let cont = s.spawn(|| catch_unwind(continuous));
        let rest = s.spawn(|| {
            [
                (7, guarded(criterion_7)),
                (8, guarded(criterion_8)),
                (9, guarded(criterion_9)),
                (10, guarded(criterion_10)),
            ]
        });
        let c11 = s.spawn(|| guarded(criterion_11));
        let mut rest = Vec::from(rest.join().unwrap());
        rest.push((11, c11.join().unwrap()));
        (e2e.join().unwrap().ok(), cont.join().unwrap().ok(), rest)
    });

    let missing = |what: &str| verdict(false, format!("{what} runs panicked"));
    let mut results: Vec<(usize, Verdict)> = Vec::new();
    results.push((1, e2e.as_ref().map_or_else(|| missing("end-to-end"), criterion_1)));
    results.push((2, cont.as_ref().map_or_else(|| missing("continuous"), criterion_2)));
    results.push((3, cont.as_ref().map_or_else(|| missing("continuous"), criterion_3)));
    let both = e2e.as_ref().zip(cont.as_ref());
    results.push((4, both.map_or_else(|| missing("audited"), |(e, c)| criterion_4(e, c))));
    results.push((5, both.map_or_else(|| missing("audited"), |(e, c)| criterion_5(e, c))));
    results.push((6, both.map_or_else(|| missing("audited"), |(e, c)| criterion_6(e, c))));
    results.extend(independent);

    let names = [
        "oracle equivalence",
        "continuous solver",
        "weak duality",
        "cache coherence",
        "line search",
        "reference sequence",
        "projection",
        "origin check",
        "risk-return trend",
        "harness shape",
        "warmstart equivalence",
    ];
    let mut failed = 0;
    for (k, v) in &results {
        failed += !v.pass as usize;
        println!(
            "criterion {k:>2} {:<22} {}  {}",
            names[k - 1],
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
    }
    let secs = start.elapsed().as_secs_f64();
    println!("{} of {} criteria passed in {secs:.1}s", results.len() - failed, results.len());
    if failed == 0 && secs < 300.0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
