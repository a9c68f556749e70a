//! Ground truth for small instances: exhaustive search over profiles on a
//! level grid, the static monopoly price, and the revenue of a seller who
//! may price each arrival cohort separately.

use rayon::prelude::*;
use thiserror::Error;

use crate::evaluator::{revenue_and_inventory, AllocationProfile, EvalError};
use crate::market::{Inventory, Market};
use crate::scalar::Scalar;
use crate::stepfn::{Jump, StepFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("instance too large for exhaustive search: {reason}")]
    InstanceTooLarge { reason: String },
    #[error("oracle levels must lie in [0, 1] and include both 0 and 1")]
    BadLevels,
    #[error("the per-cohort benchmark is only defined for unlimited supply")]
    BoundedInventoryUnsupported,
}

/// Search space of the exhaustive oracle: allocation levels, plus caps on
/// instance size.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleGrid<S> {
    levels: Vec<S>,
    pub max_periods: usize,
    pub max_atoms: usize,
    pub max_profiles: u64,
}

impl<S: Scalar> OracleGrid<S> {
    /// Levels are sorted and deduplicated; 0 and 1 must be present.
    pub fn new(mut levels: Vec<S>) -> Result<Self, OracleError> {
        levels.sort_by(|a, b| a.total_cmp(b));
        levels.dedup();
        let ok = levels.first().is_some_and(|l| l.is_zero())
            && levels.last().is_some_and(|l| l.is_one());
        if !ok {
            return Err(OracleError::BadLevels);
        }
        Ok(OracleGrid {
            levels,
            max_periods: 3,
            max_atoms: 3,
            max_profiles: 2_000_000,
        })
    }

    /// Quarter levels `{0, 1/4, 1/2, 3/4, 1}`.
    pub fn quarters() -> Self {
        Self::new((0..=4).map(|k| S::ratio(k, 4)).collect()).expect("valid levels")
    }

    /// Levels `{0, 1}`: deterministic allocations, i.e. posted prices only.
    pub fn posted_only() -> Self {
        Self::new(vec![S::zero(), S::one()]).expect("valid levels")
    }

    pub fn levels(&self) -> &[S] {
        &self.levels
    }
}

/// Every monotone rule that is constant on each piece `[0, a_1)`, `{a_1}`,
/// `(a_1, a_2)`, …, `{a_n}`, `(a_n, 1]` with values in `levels`, in
/// lexicographic order of the level indices.
pub fn period_candidates<S: Scalar>(atoms: &[S], levels: &[S]) -> Vec<StepFunction<S>> {
    // (piece is nonempty, jump entering the piece)
    let mut pieces: Vec<(bool, Option<Jump<S>>)> = Vec::new();
    pieces.push((atoms.first().is_none_or(|a| !a.is_zero()), None));
    for a in atoms {
        pieces.push((true, Some(Jump::closed(a.clone()))));
        pieces.push((!a.is_one(), Some(Jump::open(a.clone()))));
    }
    let mut entries: Vec<Option<Jump<S>>> = pieces
        .into_iter()
        .filter(|(nonempty, _)| *nonempty)
        .map(|(_, entry)| entry)
        .collect();
    // the first piece starts at 0 whatever its entry
    entries[0] = None;

    let pieces = entries.len();
    let mut out = Vec::new();
    let mut idx = vec![0usize; pieces];
    loop {
        let mut jumps = Vec::new();
        let mut lv = vec![levels[idx[0]].clone()];
        for k in 1..pieces {
            jumps.push(entries[k].clone().expect("later pieces have an entry"));
            lv.push(levels[idx[k]].clone());
        }
        out.push(StepFunction::from_parts(jumps, lv).expect("monotone by construction"));
        // next non-decreasing index vector
        let Some(k) = (0..pieces).rev().find(|&k| idx[k] + 1 < levels.len()) else {
            break;
        };
        let bump = idx[k] + 1;
        for slot in idx.iter_mut().skip(k) {
            *slot = bump;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult<S> {
    pub revenue: S,
    pub profile: AllocationProfile<S>,
    pub inventory_used: S,
    pub profiles_checked: u64,
}

/// Exhaustive maximum of revenue over profiles built from
/// [`period_candidates`], subject to supply (with `tol` slack). Ties go to
/// the first profile in lexicographic order.
pub fn brute_force_optimal<S: Scalar>(
    m: &Market<S>,
    grid: &OracleGrid<S>,
    tol: f64,
) -> Result<OracleResult<S>, OracleError> {
    if m.periods() > grid.max_periods {
        return Err(OracleError::InstanceTooLarge {
            reason: format!(
                "{} periods exceed the cap of {}",
                m.periods(),
                grid.max_periods
            ),
        });
    }
    if m.atom_count() > grid.max_atoms {
        return Err(OracleError::InstanceTooLarge {
            reason: format!(
                "{} atoms exceed the cap of {}",
                m.atom_count(),
                grid.max_atoms
            ),
        });
    }
    let cands = period_candidates(m.atoms(), grid.levels());
    let per = cands.len() as u64;
    let total = (0..m.periods()).try_fold(1u64, |acc, _| acc.checked_mul(per));
    let total = match total {
        Some(n) if n <= grid.max_profiles => n,
        _ => {
            return Err(OracleError::InstanceTooLarge {
                reason: format!(
                    "{per}^{} profiles exceed the cap of {}",
                    m.periods(),
                    grid.max_profiles
                ),
            })
        }
    };

    let profile_at = |mut index: u64| {
        let mut rules = vec![StepFunction::zero(); m.periods()];
        for t in (0..m.periods()).rev() {
            rules[t] = cands[(index % per) as usize].clone();
            index /= per;
        }
        AllocationProfile::new(rules)
    };

    let best = (0..total)
        .into_par_iter()
        .map(|index| -> Result<Option<(S, S, u64)>, EvalError> {
            let (rev, inv) = revenue_and_inventory(m, &profile_at(index))?;
            Ok(m.inventory().admits(&inv, tol).then_some((rev, inv, index)))
        })
        .try_reduce_with(|x, y| {
            Ok(match (x, y) {
                (Some(a), Some(b)) => {
                    let b_wins = b.0 > a.0 || (b.0 == a.0 && b.2 < a.2);
                    Some(if b_wins { b } else { a })
                }
                (a, b) => a.or(b),
            })
        })
        .transpose()?
        .flatten()
        .expect("the all-zero profile is always feasible");
    Ok(OracleResult {
        revenue: best.0,
        profile: profile_at(best.2),
        inventory_used: best.1,
        profiles_checked: total,
    })
}

/// Revenue-maximizing single price for `(value, mass)` pairs: the price is
/// one of the values, ties go to the lowest. `None` for an empty list.
pub fn static_monopoly<S: Scalar>(atoms: &[(S, S)]) -> Option<(S, S)> {
    let mut best: Option<(S, S)> = None;
    let mut prices: Vec<&S> = atoms.iter().map(|(v, _)| v).collect();
    prices.sort_by(|a, b| a.total_cmp(b));
    for p in prices {
        let buyers = atoms
            .iter()
            .filter(|(v, _)| v >= p)
            .fold(S::zero(), |acc, (_, m)| acc + m.clone());
        let rev = p.clone() * buyers;
        if best.as_ref().is_none_or(|(_, b)| rev > *b) {
            best = Some((p.clone(), rev));
        }
    }
    best
}

/// Revenue of pricing each arrival cohort separately at its own monopoly
/// price, valid with unlimited supply: `Σ_t (λS_t/λB_t)·monopoly(δ_t v, mass_t)`.
pub fn non_anonymous_benchmark<S: Scalar>(m: &Market<S>) -> Result<S, OracleError> {
    if let Inventory::Bounded(_) = m.inventory() {
        return Err(OracleError::BoundedInventoryUnsupported);
    }
    let mut total = S::zero();
    for t in 0..m.periods() {
        let cohort: Vec<(S, S)> = m
            .atoms()
            .iter()
            .zip(m.arrivals(t))
            .map(|(v, mass)| (m.delta(t).clone() * v.clone(), mass.clone()))
            .collect();
        let (_, rev) = static_monopoly(&cohort).expect("markets have atoms");
        total = total + m.lambda_s(t).clone() / m.lambda_b(t).clone() * rev;
    }
    Ok(total)
}
