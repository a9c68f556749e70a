//! End-to-end runs: solve, price, verify; and the revenue comparison
//! between anonymous mechanisms, posted prices and per-cohort pricing.

use thiserror::Error;

use crate::evaluator::{evaluate, EvalError, Evaluation};
use crate::market::Market;
use crate::mechanism::{extract, ExtractError, PricedMechanism};
use crate::optimizer::{coordinate_ascent_with, AscentOptions, SolveError, SolveReport};
use crate::oracle::{brute_force_optimal, non_anonymous_benchmark, OracleError, OracleGrid};
use crate::scalar::Scalar;
use crate::verifier::{verify, Verification};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution<S> {
    pub report: SolveReport<S>,
    pub evaluation: Evaluation<S>,
    pub mechanism: PricedMechanism<S>,
    pub verification: Verification<S>,
}

/// Coordinate ascent, then mechanism extraction and verification of the
/// best profile.
pub fn solve<S: Scalar>(m: &Market<S>, opts: &AscentOptions) -> Result<Solution<S>, PipelineError> {
    let report = coordinate_ascent_with(m, opts, &[])?;
    let evaluation = evaluate(m, &report.profile)?;
    let mechanism = extract(m, &report.profile, opts.tol)?;
    let verification = verify(m, &report.profile, &mechanism, opts.tol);
    Ok(Solution {
        report,
        evaluation,
        mechanism,
        verification,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison<S> {
    pub anonymous: SolveReport<S>,
    /// Best deterministic (posted-price) profile on the oracle grid; `None`
    /// when the instance exceeds the oracle caps.
    pub posted_only: Option<S>,
    /// Per-cohort monopoly pricing; `None` with limited supply.
    pub non_anonymous: Option<S>,
}

/// Anonymous optimum by ascent, posted-price optimum by exhaustive search
/// over `{0, 1}` allocations, and the per-cohort benchmark. The posted-price
/// optimum seeds an extra ascent start, so the anonymous figure is never
/// below it.
pub fn compare<S: Scalar>(
    m: &Market<S>,
    opts: &AscentOptions,
    caps: &OracleGrid<S>,
) -> Result<Comparison<S>, PipelineError> {
    let mut grid = OracleGrid::posted_only();
    grid.max_periods = caps.max_periods;
    grid.max_atoms = caps.max_atoms;
    grid.max_profiles = caps.max_profiles;
    let posted = match brute_force_optimal(m, &grid, opts.tol) {
        Ok(found) => Some(found),
        Err(OracleError::InstanceTooLarge { .. }) => None,
        Err(e) => return Err(e.into()),
    };
    let extra: Vec<_> = posted.iter().map(|p| p.profile.clone()).collect();
    let anonymous = coordinate_ascent_with(m, opts, &extra)?;
    let non_anonymous = match non_anonymous_benchmark(m) {
        Ok(v) => Some(v),
        Err(OracleError::BoundedInventoryUnsupported) => None,
        Err(e) => return Err(e.into()),
    };
    Ok(Comparison {
        anonymous,
        posted_only: posted.map(|p| p.revenue),
        non_anonymous,
    })
}
