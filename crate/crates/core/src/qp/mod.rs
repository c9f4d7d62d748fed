//! The dual quadratic program over triplet multipliers:
//!
//! ```text
//! maximize   Σ_t β_t − ½ Σ_t Σ_t' β_t β_t' G(t, t')
//! subject to β ≥ 0,  Σ_k β_ijk ≤ C  for every relevant pair (i, j)
//! ```
//!
//! solved by projected-gradient ascent, followed by recovery of
//! `W = Σ β_ijk z_i (x_j − x_k)ᵀ` and a duality-gap certificate.

mod certificate;
mod gram;
mod projection;
mod solver;

pub use certificate::{certify, recover_w, Certificate};
pub use gram::{dual_objective, GramOracle, DIFF_CACHE_CAPACITY, MAX_DENSE_TRIPLETS};
pub use projection::{project_capped_simplex, project_capped_simplex_in_place};
pub use solver::solve_dual;

use crate::domain::{Preprocessing, Provenance, RetrievalDataset, SimilarityModel};
use crate::error::{Error, Result};
use crate::triplets::TripletSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepRule {
    /// Fixed step `1/L`, `L` from power iteration on the Gram operator, with
    /// halving as a fallback if a step ever lowers the objective.
    #[default]
    InverseLipschitz,
    /// Start from a unit step, halve until the objective does not drop and
    /// double again after each accepted step.
    Backtracking,
}

/// Most-violated-constraint working set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WorkingSetConfig {
    /// Irrelevant items kept per relevant pair.
    pub cap_per_pair: usize,
    /// Iterations between refreshes.
    pub refresh_every: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub c: f64,
    pub max_iterations: usize,
    /// Relative change of the dual objective between iterations.
    pub rel_tol: f64,
    /// Bound on the projected-gradient residual.
    pub kkt_tol: f64,
    pub step_rule: StepRule,
    /// Nesterov extrapolation with the fixed `1/L` step. An extrapolated
    /// step is only accepted if it does not lower the objective; otherwise
    /// the momentum restarts, so the ascent stays monotone.
    pub momentum: bool,
    pub working_set: Option<WorkingSetConfig>,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            c: 1.0,
            max_iterations: 10_000,
            rel_tol: 1e-8,
            kkt_tol: 1e-6,
            step_rule: StepRule::InverseLipschitz,
            momentum: true,
            working_set: None,
        }
    }
}

impl SolverConfig {
    pub fn with_c(c: f64) -> Self {
        SolverConfig {
            c,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidParameter("C must be positive".into()));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(Error::InvalidParameter("rel_tol must be positive".into()));
        }
        if self.kkt_tol.is_nan() || self.kkt_tol <= 0.0 {
            return Err(Error::InvalidParameter("kkt_tol must be positive".into()));
        }
        if let Some(ws) = self.working_set {
            if ws.cap_per_pair == 0 || ws.refresh_every == 0 {
                return Err(Error::InvalidParameter(
                    "working set cap and refresh interval must be ≥ 1".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Multipliers returned by [`solve_dual`].
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// Aligned with `triplets`.
    pub beta: Vec<f64>,
    /// Triplets the multipliers belong to. With a working set this is the
    /// final working set rather than the input.
    pub triplets: TripletSet,
    pub c: f64,
    pub dual_objective: f64,
    pub iterations: usize,
    pub converged: bool,
    pub max_kkt_violation: f64,
    /// Dual objective after every accepted iteration, starting point first.
    pub objective_trace: Vec<f64>,
    /// Step-size constant used by the default step rule.
    pub lipschitz: f64,
}

impl DualSolution {
    /// `C − Σ_k β_ijk` for each group, in group order.
    pub fn alpha(&self) -> Vec<f64> {
        self.triplets
            .groups()
            .iter()
            .map(|g| self.c - self.beta[g.range.clone()].iter().sum::<f64>())
            .collect()
    }

    /// Trained model with `W` recovered from the multipliers.
    pub fn model(
        &self,
        ds: &RetrievalDataset,
        preprocessing: Preprocessing,
    ) -> Result<SimilarityModel> {
        let w = recover_w(&self.beta, &self.triplets, ds)?;
        SimilarityModel::new(w, Provenance::Trained, Some(self.c), preprocessing)
    }
}
