use serde::Serialize;

use super::DualSolution;
use crate::domain::{Preprocessing, Provenance, RetrievalDataset, SimilarityModel, SquareMatrix};
use crate::error::{Error, Result};
use crate::metrics::{hinge_from_scores, primal_objective_for};
use crate::similarity::score_all;
use crate::triplets::TripletSet;

/// `W = Σ_t β_t z_i (x_j − x_k)ᵀ`, accumulated one rank-one term at a time
/// in triplet order. Zero multipliers are skipped.
pub fn recover_w(
    beta: &[f64],
    triplets: &TripletSet,
    ds: &RetrievalDataset,
) -> Result<SquareMatrix> {
    if beta.len() != triplets.len() {
        return Err(Error::DimensionMismatch {
            what: "multiplier vector".into(),
            expected: triplets.len(),
            found: beta.len(),
        });
    }
    let d = ds.dim();
    let mut w = SquareMatrix::zeros(d);
    let mut diff = vec![0.0; d];
    for (t, &b) in triplets.triplets().iter().zip(beta) {
        if b == 0.0 {
            continue;
        }
        let xj = ds.item(t.relevant).as_slice();
        let xk = ds.item(t.irrelevant).as_slice();
        for (o, (a, c)) in diff.iter_mut().zip(xj.iter().zip(xk)) {
            *o = a - c;
        }
        w.add_outer(b, ds.query(t.query).as_slice(), &diff);
    }
    Ok(w)
}

/// Optimality evidence for a dual solution.
///
/// With `W = W(β)` the duality gap splits exactly into the complementarity
/// terms `Σ α_ij ξ_ij + Σ β_ijk (ξ_ij − c_ijk)`, where `c_ijk` is the
/// constraint value `1 + z_iᵀ W (x_k − x_j)`. Both kinds of term are
/// non-negative for feasible `β`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Certificate {
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub duality_gap: f64,
    /// `gap / max(1, |dual|)`.
    pub relative_gap: f64,
    /// `C − Σ_k β_ijk` per group.
    pub alpha: Vec<f64>,
    /// Largest `α_ij ξ_ij`.
    pub max_slack_residual: f64,
    /// Largest `β_ijk (ξ_ij − c_ijk)`.
    pub max_active_residual: f64,
    /// Largest violation of `β ≥ 0` or `Σ_k β_ijk ≤ C`.
    pub max_constraint_violation: f64,
    /// The gap is not below −1e-9.
    pub weak_duality_holds: bool,
    pub certified: bool,
}

pub const GAP_CERTIFY_TOL: f64 = 1e-4;
pub const WEAK_DUALITY_SLACK: f64 = 1e-9;

pub fn certify(
    solution: &DualSolution,
    ds: &RetrievalDataset,
    kkt_tol: f64,
) -> Result<Certificate> {
    let triplets = &solution.triplets;
    let beta = &solution.beta;
    let c = solution.c;
    let w = recover_w(beta, triplets, ds)?;
    let model = SimilarityModel::new(w, Provenance::Trained, Some(c), Preprocessing::default())?;
    let queries = triplets.queries();
    let primal = primal_objective_for(ds, &model, c, &queries)?;
    let dual = solution.dual_objective;
    let gap = primal - dual;

    let alpha = solution.alpha();
    let mut max_slack_residual = 0.0f64;
    let mut max_active_residual = 0.0f64;
    let mut max_constraint_violation = 0.0f64;
    let groups = triplets.groups();
    let mut g_idx = 0;
    for &i in &queries {
        let scores = score_all(ds.query(i), ds, &model)?;
        let row = ds.relevance_row(i);
        while g_idx < groups.len() && groups[g_idx].query == i {
            let g = &groups[g_idx];
            let xi = hinge_from_scores(&scores, row, g.relevant);
            let a = alpha[g_idx];
            max_constraint_violation = max_constraint_violation.max(-a);
            max_slack_residual = max_slack_residual.max(a.max(0.0) * xi);
            for pos in g.range.clone() {
                let b = beta[pos];
                max_constraint_violation = max_constraint_violation.max(-b);
                let k = triplets.get(pos).irrelevant;
                let constraint = 1.0 + scores[k] - scores[g.relevant];
                max_active_residual = max_active_residual.max(b.max(0.0) * (xi - constraint));
            }
            g_idx += 1;
        }
    }

    let relative_gap = gap / dual.abs().max(1.0);
    let certified = relative_gap < GAP_CERTIFY_TOL
        && max_slack_residual < kkt_tol
        && max_active_residual < kkt_tol
        && max_constraint_violation < kkt_tol;
    Ok(Certificate {
        primal_objective: primal,
        dual_objective: dual,
        duality_gap: gap,
        relative_gap,
        alpha,
        max_slack_residual,
        max_active_residual,
        max_constraint_violation,
        weak_duality_holds: gap >= -WEAK_DUALITY_SLACK,
        certified,
    })
}
