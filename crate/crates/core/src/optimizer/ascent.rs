//! Multistart coordinate ascent over monotone allocation profiles.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use super::lp::{build_coordinate_lp, solve_coordinate, LpError};
use crate::evaluator::{revenue_and_inventory, AllocationProfile, EvalError};
use crate::market::Market;
use crate::scalar::Scalar;
use crate::stepfn::{Jump, StepFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AscentOptions {
    /// Random starts in addition to the all-zero and all-one profiles.
    pub starts: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub seed: u64,
}

impl AscentOptions {
    /// Defaults for a backend: tolerance 1e-9 for exact arithmetic, 1e-7
    /// for floats.
    pub fn for_backend<S: Scalar>() -> Self {
        AscentOptions {
            starts: 16,
            max_sweeps: 50,
            tol: default_tolerance::<S>(),
            seed: 0,
        }
    }
}

pub fn default_tolerance<S: Scalar>() -> f64 {
    if S::EXACT {
        1e-9
    } else {
        1e-7
    }
}

/// Result of one start.
#[derive(Debug, Clone, PartialEq)]
pub struct StartOutcome<S> {
    /// `zero`, `ones`, `random:<seed>` or `extra:<index>`.
    pub label: String,
    pub revenue: S,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport<S> {
    pub profile: AllocationProfile<S>,
    pub revenue: S,
    pub inventory_used: S,
    /// Sweeps taken by the winning start.
    pub sweeps: usize,
    pub starts: Vec<StartOutcome<S>>,
    /// Supply is limited and used up to within the tolerance.
    pub binding: bool,
    /// The winning start stopped before the sweep limit.
    pub converged: bool,
}

impl<S: Scalar> SolveReport<S> {
    /// Index of the winning start in `starts`.
    pub fn best_start(&self) -> Option<usize> {
        self.starts.iter().position(|s| s.revenue == self.revenue)
    }
}

/// A random monotone profile whose rules have the shapes the subproblem
/// produces: zero, a full or partial single step, or two steps ending at 1.
pub fn random_profile<S: Scalar, R: Rng>(m: &Market<S>, rng: &mut R) -> AllocationProfile<S> {
    let mut keys: Vec<Jump<S>> = vec![Jump::closed(S::zero())];
    for v in m.atoms() {
        if !v.is_zero() {
            keys.push(Jump::closed(v.clone()));
        }
        if !v.is_one() {
            keys.push(Jump::open(v.clone()));
        }
    }
    let level = |rng: &mut R| S::ratio(rng.random_range(1..4), 4);
    let rules = (0..m.periods())
        .map(|_| {
            let k = rng.random_range(0..keys.len());
            match rng.random_range(0..4) {
                0 => StepFunction::zero(),
                1 => StepFunction::indicator(keys[k].clone()),
                2 => StepFunction::scaled(keys[k].clone(), level(rng)).expect("level in (0,1)"),
                _ => {
                    let l = rng.random_range(0..keys.len());
                    if k == l {
                        return StepFunction::indicator(keys[k].clone());
                    }
                    let (lo, hi) = (k.min(l), k.max(l));
                    StepFunction::from_parts(
                        vec![keys[lo].clone(), keys[hi].clone()],
                        vec![S::zero(), level(rng), S::one()],
                    )
                    .expect("two ordered steps")
                }
            }
        })
        .collect();
    AllocationProfile::new(rules)
}

/// Closes the latest open periods until the profile fits the supply.
pub fn repair<S: Scalar>(
    m: &Market<S>,
    mut a: AllocationProfile<S>,
    tol: f64,
) -> Result<AllocationProfile<S>, EvalError> {
    loop {
        let (_, used) = revenue_and_inventory(m, &a)?;
        if m.inventory().admits(&used, tol) {
            return Ok(a);
        }
        let Some(t) = (0..a.periods()).rev().find(|&t| !a.rule(t).is_zero()) else {
            return Ok(a);
        };
        a.set_rule(t, StepFunction::zero());
    }
}

struct Climb<S> {
    profile: AllocationProfile<S>,
    revenue: S,
    inventory: S,
    sweeps: usize,
    converged: bool,
}

/// Sweeps the periods in order, replacing each rule by the exact maximizer
/// of its subproblem. Stops after a sweep that changes nothing, or after two
/// consecutive sweeps that gain no more than `tol`.
fn climb<S: Scalar>(
    m: &Market<S>,
    start: AllocationProfile<S>,
    opts: &AscentOptions,
) -> Result<Climb<S>, SolveError> {
    let mut profile = start;
    let (mut revenue, mut inventory) = revenue_and_inventory(m, &profile)?;
    let mut quiet = 0;
    let mut sweeps = 0;
    let mut converged = false;
    while sweeps < opts.max_sweeps {
        sweeps += 1;
        let mut changed = false;
        let mut improved = false;
        for t in 0..m.periods() {
            let lp = build_coordinate_lp(m, &profile, t, opts.tol)?;
            let h = solve_coordinate(&lp, opts.tol);
            if h == *profile.rule(t) {
                continue;
            }
            let next = profile.with_rule(t, h);
            let (rev, inv) = revenue_and_inventory(m, &next)?;
            let keeps_revenue = rev >= revenue || rev.approx_eq(&revenue, opts.tol);
            if keeps_revenue && m.inventory().admits(&inv, opts.tol) {
                improved |= !rev.approx_eq(&revenue, opts.tol);
                changed = true;
                profile = next;
                revenue = rev;
                inventory = inv;
            }
        }
        if !changed {
            converged = true;
            break;
        }
        quiet = if improved { 0 } else { quiet + 1 };
        if quiet >= 2 {
            converged = true;
            break;
        }
    }
    Ok(Climb {
        profile,
        revenue,
        inventory,
        sweeps,
        converged,
    })
}

/// Multistart coordinate ascent from the all-zero profile, the all-one
/// profile and `opts.starts` random profiles.
pub fn coordinate_ascent<S: Scalar>(
    m: &Market<S>,
    opts: &AscentOptions,
) -> Result<SolveReport<S>, SolveError> {
    coordinate_ascent_with(m, opts, &[])
}

/// As [`coordinate_ascent`], with additional caller-supplied starts.
///
/// Starts run in parallel; the winner is the highest revenue, ties (within
/// the tolerance) going to the earliest start, so results depend only on
/// the options.
pub fn coordinate_ascent_with<S: Scalar>(
    m: &Market<S>,
    opts: &AscentOptions,
    extra: &[AllocationProfile<S>],
) -> Result<SolveReport<S>, SolveError> {
    let mut labelled: Vec<(String, AllocationProfile<S>)> = vec![
        ("zero".into(), AllocationProfile::zero(m.periods())),
        ("ones".into(), AllocationProfile::ones(m.periods())),
    ];
    for k in 0..opts.starts {
        let seed = opts.seed.wrapping_add(k as u64);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        labelled.push((format!("random:{seed}"), random_profile(m, &mut rng)));
    }
    for (k, a) in extra.iter().enumerate() {
        labelled.push((format!("extra:{k}"), a.clone()));
    }

    let climbs: Vec<Result<Climb<S>, SolveError>> = labelled
        .par_iter()
        .map(|(_, start)| {
            let start = repair(m, start.clone(), opts.tol)?;
            climb(m, start, opts)
        })
        .collect();
    let climbs = climbs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let mut best = 0;
    for (k, c) in climbs.iter().enumerate() {
        let lead = &climbs[best].revenue;
        if c.revenue > *lead && !c.revenue.approx_eq(lead, opts.tol) {
            best = k;
        }
    }
    let starts = labelled
        .iter()
        .zip(&climbs)
        .map(|((label, _), c)| StartOutcome {
            label: label.clone(),
            revenue: c.revenue.clone(),
            sweeps: c.sweeps,
            converged: c.converged,
        })
        .collect();
    let winner = climbs.into_iter().nth(best).expect("at least two starts");
    let binding = m
        .inventory()
        .bound()
        .is_some_and(|cap| winner.inventory.approx_eq(cap, opts.tol));
    Ok(SolveReport {
        profile: winner.profile,
        revenue: winner.revenue,
        inventory_used: winner.inventory,
        sweeps: winner.sweeps,
        starts,
        binding,
        converged: winner.converged,
    })
}
