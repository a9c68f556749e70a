//! Raising allocations to 1 wherever a buyer is already certain to be
//! served within a block of periods sharing one valuation discount.

use crate::evaluator::{AllocationProfile, EvalError};
use crate::market::Market;
use crate::scalar::Scalar;
use crate::stepfn::{Jump, StepFunction};

/// For each maximal run of periods with equal `δ` (compared exactly), finds
/// the region where the discounted chance of eventual service equals `δ_t`
/// (within `tol`) and allocates with certainty there. The region is an
/// upper set in `v` for each period, so the result stays monotone and is
/// pointwise at least the input. Revenue and welfare are unchanged when
/// money is undiscounted.
pub fn normalize_staircase<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    tol: f64,
) -> Result<AllocationProfile<S>, EvalError> {
    if a.periods() != m.periods() {
        return Err(EvalError::ProfileLength {
            expected: m.periods(),
            found: a.periods(),
        });
    }
    let periods = m.periods();
    let part = a.refinement(m.atoms());
    let pts = part.points();

    // positions along the axis: point 0, segment 0, point 1, …, point m;
    // the rule values there are the point value or the segment level
    let positions: Vec<(Jump<S>, Vec<S>)> = (0..pts.len())
        .flat_map(|k| {
            let at_point = (
                Jump::closed(pts[k].clone()),
                a.rules()
                    .iter()
                    .map(|r| r.level_at(&pts[k]).clone())
                    .collect(),
            );
            let inside = (k + 1 < pts.len()).then(|| {
                (
                    Jump::open(pts[k].clone()),
                    a.rules()
                        .iter()
                        .map(|r| r.level_right_of(&pts[k]).clone())
                        .collect(),
                )
            });
            std::iter::once(at_point).chain(inside)
        })
        .collect();

    // service[t][k]: Σ_{j≥t} δ_j r_j Π_{t≤i<j} (1 − r_i) at position k
    let mut service = vec![vec![S::zero(); positions.len()]; periods + 1];
    for t in (0..periods).rev() {
        let (head, tail) = service.split_at_mut(t + 1);
        for ((slot, later), (_, r)) in head[t].iter_mut().zip(&tail[0]).zip(&positions) {
            *slot = m.delta(t).clone() * r[t].clone() + (S::one() - r[t].clone()) * later.clone();
        }
    }

    let mut out = a.clone();
    for (t, row) in service.iter().enumerate().take(periods) {
        let tied = (t > 0 && m.delta(t - 1) == m.delta(t))
            || (t + 1 < periods && m.delta(t + 1) == m.delta(t));
        if !tied {
            continue;
        }
        let delta = m.delta(t);
        let cut = positions
            .iter()
            .zip(row)
            .find(|(_, s)| *s >= delta || s.approx_eq(delta, tol))
            .map(|((jump, _), _)| jump.clone());
        if let Some(jump) = cut {
            out.set_rule(t, a.rule(t).max(&StepFunction::indicator(jump)));
        }
    }
    Ok(out)
}
