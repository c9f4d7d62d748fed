use std::cmp::Ordering;

use super::gram::{objective_from_product, GramOracle};
use super::projection::project_capped_simplex_in_place;
use super::{DualSolution, SolverConfig, StepRule, WorkingSetConfig};
use crate::domain::dot;
use crate::error::{Error, Result};
use crate::triplets::{Triplet, TripletSet};

const POWER_ITERATIONS: usize = 50;
const LIPSCHITZ_SAFETY: f64 = 1.01;
const MAX_HALVINGS: usize = 60;
/// Multipliers below this are zeroed once the solver stops.
const BETA_TRUNCATION: f64 = 1e-12;

/// Maximizes the dual objective over the product of capped simplices, one
/// per `(query, relevant)` group.
pub fn solve_dual(
    triplets: &TripletSet,
    oracle: &GramOracle,
    cfg: &SolverConfig,
) -> Result<DualSolution> {
    cfg.validate()?;
    if triplets.is_empty() {
        return Ok(DualSolution {
            beta: Vec::new(),
            triplets: triplets.clone(),
            c: cfg.c,
            dual_objective: 0.0,
            iterations: 0,
            converged: true,
            max_kkt_violation: 0.0,
            objective_trace: vec![0.0],
            lipschitz: 0.0,
        });
    }
    match cfg.working_set {
        None => {
            let mut trace = Vec::new();
            let beta = vec![0.0; triplets.len()];
            let run = ascend(triplets, oracle, cfg, beta, cfg.max_iterations, &mut trace)?;
            finish(triplets.clone(), oracle, cfg, run, trace)
        }
        Some(ws) => solve_with_working_set(triplets, oracle, cfg, ws),
    }
}

struct Ascent {
    beta: Vec<f64>,
    iterations: usize,
    converged: bool,
    lipschitz: f64,
}

/// Largest eigenvalue of the Gram operator by power iteration (Rayleigh quotient).
fn estimate_lipschitz(triplets: &TripletSet, oracle: &GramOracle) -> f64 {
    let n = triplets.len();
    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut lambda = 0.0;
    for _ in 0..POWER_ITERATIONS {
        let gv = oracle.apply(triplets, &v);
        lambda = dot(&v, &gv);
        let norm = dot(&gv, &gv).sqrt();
        if norm == 0.0 || !norm.is_finite() {
            break;
        }
        v = gv.into_iter().map(|x| x / norm).collect();
    }
    lambda.max(0.0)
}

fn project_groups(beta: &mut [f64], triplets: &TripletSet, cap: f64) {
    for g in triplets.groups() {
        project_capped_simplex_in_place(&mut beta[g.range.clone()], cap);
    }
}

/// Natural residual `max_t |β_t − P(β + ∇)_t|`; zero exactly at a maximizer.
fn kkt_residual(beta: &[f64], grad: &[f64], triplets: &TripletSet, cap: f64) -> f64 {
    let mut moved: Vec<f64> = beta.iter().zip(grad).map(|(b, g)| b + g).collect();
    project_groups(&mut moved, triplets, cap);
    beta.iter()
        .zip(&moved)
        .map(|(b, p)| (b - p).abs())
        .fold(0.0, f64::max)
}

fn gradient(g_beta: &[f64]) -> Vec<f64> {
    g_beta.iter().map(|g| 1.0 - g).collect()
}

fn checked_objective(beta: &[f64], g_beta: &[f64]) -> Result<f64> {
    let obj = objective_from_product(beta, g_beta);
    if !obj.is_finite() {
        return Err(Error::NumericalOverflow(
            "dual objective is not finite".into(),
        ));
    }
    Ok(obj)
}

/// `x + θ (x − x_prev)`. By linearity the same map extrapolates Gram products.
fn extrapolate(x: &[f64], prev: &[f64], theta: f64) -> Vec<f64> {
    x.iter()
        .zip(prev)
        .map(|(a, b)| a + theta * (a - b))
        .collect()
}

/// Projected-gradient ascent from `beta`, appending the objective after every
/// iteration to `trace`.
///
/// Each iteration steps from the extrapolated point `y`. A candidate that
/// would lower the objective is rejected: the momentum restarts from the
/// current iterate, and if a plain step still fails the step is halved.
fn ascend(
    triplets: &TripletSet,
    oracle: &GramOracle,
    cfg: &SolverConfig,
    mut beta: Vec<f64>,
    budget: usize,
    trace: &mut Vec<f64>,
) -> Result<Ascent> {
    let cap = cfg.c;
    project_groups(&mut beta, triplets, cap);

    let lipschitz = match cfg.step_rule {
        StepRule::InverseLipschitz => estimate_lipschitz(triplets, oracle) * LIPSCHITZ_SAFETY,
        StepRule::Backtracking => 0.0,
    };
    let mut step = match cfg.step_rule {
        // A zero operator leaves a linear objective; any step of size ≥ C
        // lands on the group caps.
        StepRule::InverseLipschitz if lipschitz > f64::MIN_POSITIVE => 1.0 / lipschitz,
        StepRule::InverseLipschitz => 2.0 * cap,
        StepRule::Backtracking => 1.0,
    };
    let accelerate = cfg.momentum && cfg.step_rule == StepRule::InverseLipschitz;

    let mut g_beta = oracle.apply(triplets, &beta);
    let mut obj = checked_objective(&beta, &g_beta)?;
    trace.push(obj);
    let mut prev = beta.clone();
    let mut g_prev = g_beta.clone();
    let mut t = 1.0f64;
    let mut theta = 0.0;

    let mut rel_change = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < budget {
        let grad = gradient(&g_beta);
        let kkt = kkt_residual(&beta, &grad, triplets, cap);
        if rel_change < cfg.rel_tol && kkt < cfg.kkt_tol {
            converged = true;
            break;
        }

        // Rounding noise near the optimum must not trigger a restart.
        let slack = 4.0 * f64::EPSILON * obj.abs().max(1.0);
        let mut accepted = None;
        let mut halvings = 0;
        while halvings <= MAX_HALVINGS {
            let (y, g_y) = if theta > 0.0 {
                (
                    extrapolate(&beta, &prev, theta),
                    extrapolate(&g_beta, &g_prev, theta),
                )
            } else {
                (beta.clone(), g_beta.clone())
            };
            let mut cand: Vec<f64> = y
                .iter()
                .zip(&g_y)
                .map(|(b, g)| b + step * (1.0 - g))
                .collect();
            project_groups(&mut cand, triplets, cap);
            let g_cand = oracle.apply(triplets, &cand);
            let obj_cand = checked_objective(&cand, &g_cand)?;
            if obj_cand >= obj - slack {
                accepted = Some((cand, g_cand, obj_cand));
                break;
            }
            if theta > 0.0 {
                theta = 0.0;
                t = 1.0;
            } else {
                step *= 0.5;
                halvings += 1;
            }
        }
        iterations += 1;
        let Some((cand, g_cand, obj_cand)) = accepted else {
            // No step makes progress: the iterate is stationary up to rounding.
            converged = kkt < cfg.kkt_tol;
            break;
        };
        rel_change = (obj_cand - obj).abs() / obj_cand.abs().max(1.0);
        prev = std::mem::replace(&mut beta, cand);
        g_prev = std::mem::replace(&mut g_beta, g_cand);
        obj = obj_cand;
        trace.push(obj);
        if accelerate {
            let t_next = (1.0 + (1.0 + 4.0 * t * t).sqrt()) / 2.0;
            theta = (t - 1.0) / t_next;
            t = t_next;
        }
        if cfg.step_rule == StepRule::Backtracking {
            step *= 2.0;
        }
    }
    if !converged && iterations == budget && rel_change < cfg.rel_tol {
        let grad = gradient(&g_beta);
        converged = kkt_residual(&beta, &grad, triplets, cap) < cfg.kkt_tol;
    }
    Ok(Ascent {
        beta,
        iterations,
        converged,
        lipschitz,
    })
}

fn finish(
    triplets: TripletSet,
    oracle: &GramOracle,
    cfg: &SolverConfig,
    run: Ascent,
    trace: Vec<f64>,
) -> Result<DualSolution> {
    let mut beta = run.beta;
    for b in beta.iter_mut() {
        if *b < BETA_TRUNCATION {
            *b = 0.0;
        }
    }
    let g_beta = oracle.apply(&triplets, &beta);
    let dual_objective = checked_objective(&beta, &g_beta)?;
    let max_kkt_violation = kkt_residual(&beta, &gradient(&g_beta), &triplets, cfg.c);
    Ok(DualSolution {
        beta,
        triplets,
        c: cfg.c,
        dual_objective,
        iterations: run.iterations,
        converged: run.converged,
        max_kkt_violation,
        objective_trace: trace,
        lipschitz: run.lipschitz,
    })
}

/// Cutting-plane loop: ascend on a reduced set of irrelevant items per pair
/// and periodically swap in the most violated ones.
fn solve_with_working_set(
    initial: &TripletSet,
    oracle: &GramOracle,
    cfg: &SolverConfig,
    ws: WorkingSetConfig,
) -> Result<DualSolution> {
    let mut current = initial.clone();
    let mut beta = vec![0.0; current.len()];
    let mut trace = Vec::new();
    let mut total = 0;
    let mut lipschitz;
    let mut converged = false;
    loop {
        let budget = ws.refresh_every.min(cfg.max_iterations - total);
        let run = ascend(&current, oracle, cfg, beta, budget, &mut trace)?;
        total += run.iterations;
        lipschitz = run.lipschitz;
        let refreshed = refresh(&current, &run.beta, oracle, ws.cap_per_pair);
        if refreshed == current {
            beta = run.beta;
            if run.converged {
                converged = true;
                break;
            }
        } else {
            beta = remap(&current, &run.beta, &refreshed);
            current = refreshed;
        }
        if total >= cfg.max_iterations {
            break;
        }
        // A restarted ascent repeats the starting objective; keep the trace
        // one entry per accepted iterate.
        trace.pop();
    }
    let run = Ascent {
        beta,
        iterations: total,
        converged,
        lipschitz,
    };
    finish(current, oracle, cfg, run, trace)
}

/// New working set: per pair, items with positive multipliers plus the
/// `cap` most violated irrelevant items under the current `W(β)`.
fn refresh(current: &TripletSet, beta: &[f64], oracle: &GramOracle, cap: usize) -> TripletSet {
    let ds = oracle.dataset();
    let scores = oracle.query_scores(current, beta);
    let mut per_query = scores.iter();
    let mut active: Option<&(usize, Vec<f64>)> = None;
    let mut triplets = Vec::with_capacity(current.len());
    for g in current.groups() {
        if active.map(|a| a.0) != Some(g.query) {
            active = per_query.find(|a| a.0 == g.query);
        }
        let s = &active.expect("scores for every grouped query").1;
        let row = ds.relevance_row(g.query);
        let mut candidates: Vec<usize> = (0..row.len()).filter(|&k| !row[k]).collect();
        // Most violated first: largest s_k − s_j, ties to the lower index.
        candidates.sort_by(|&a, &b| {
            s[b].partial_cmp(&s[a])
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        let mut keep: Vec<usize> = candidates.into_iter().take(cap).collect();
        for pos in g.range.clone() {
            if beta[pos] > 0.0 {
                keep.push(current.get(pos).irrelevant);
            }
        }
        keep.sort_unstable();
        keep.dedup();
        triplets.extend(keep.into_iter().map(|k| Triplet {
            query: g.query,
            relevant: g.relevant,
            irrelevant: k,
        }));
    }
    TripletSet::from_sorted(triplets)
}

fn remap(from: &TripletSet, beta: &[f64], to: &TripletSet) -> Vec<f64> {
    let mut out = vec![0.0; to.len()];
    for (pos, t) in from.triplets().iter().enumerate() {
        if let Some(p) = to.position(t) {
            out[p] = beta[pos];
        }
    }
    out
}
