//! Closed-form evaluation of an allocation profile: presence masses,
//! utility curves, truthful payments, revenue, inventory and welfare.
//!
//! Utilities integrate against Lebesgue measure on the value axis; atom
//! masses only enter through the presence table.

use thiserror::Error;

use crate::market::Market;
use crate::scalar::Scalar;
use crate::stepfn::{segment_refinement, Partition, PiecewiseLinear, StepFunction};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("profile has {found} periods but the market has {expected}")]
    ProfileLength { expected: usize, found: usize },
}

/// One allocation rule per period, indexed from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProfile<S> {
    rules: Vec<StepFunction<S>>,
}

impl<S: Scalar> AllocationProfile<S> {
    pub fn new(rules: Vec<StepFunction<S>>) -> Self {
        AllocationProfile { rules }
    }

    pub fn zero(periods: usize) -> Self {
        Self::new(vec![StepFunction::zero(); periods])
    }

    pub fn ones(periods: usize) -> Self {
        Self::new(vec![StepFunction::one(); periods])
    }

    pub fn periods(&self) -> usize {
        self.rules.len()
    }

    pub fn rule(&self, t: usize) -> &StepFunction<S> {
        &self.rules[t]
    }

    pub fn rules(&self) -> &[StepFunction<S>] {
        &self.rules
    }

    /// Copy with period `t` replaced.
    pub fn with_rule(&self, t: usize, rule: StepFunction<S>) -> Self {
        let mut rules = self.rules.clone();
        rules[t] = rule;
        Self::new(rules)
    }

    pub fn set_rule(&mut self, t: usize, rule: StepFunction<S>) {
        self.rules[t] = rule;
    }

    /// Common refinement of all rules, with `extra` points merged in.
    pub fn refinement(&self, extra: &[S]) -> Partition<S> {
        let refs: Vec<&StepFunction<S>> = self.rules.iter().collect();
        segment_refinement(&refs, extra)
    }

    pub fn convert<T: Scalar>(&self, conv: impl Fn(&S) -> T + Copy) -> AllocationProfile<T> {
        AllocationProfile::new(self.rules.iter().map(|r| r.convert(conv)).collect())
    }
}

fn check<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>) -> Result<(), EvalError> {
    if m.periods() == a.periods() {
        Ok(())
    } else {
        Err(EvalError::ProfileLength {
            expected: m.periods(),
            found: a.periods(),
        })
    }
}

/// `fstar[t][i]`: mass of value-`v_i` buyers present in period `t`, by the
/// carry-over recursion.
pub fn compute_fstar<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Vec<Vec<S>>, EvalError> {
    check(m, a)?;
    let mut table: Vec<Vec<S>> = Vec::with_capacity(m.periods());
    for t in 0..m.periods() {
        let row = match table.last() {
            None => m.arrivals(0).to_vec(),
            Some(prev) => m
                .atoms()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let stay = S::one() - a.rule(t - 1).level_at(v).clone();
                    m.mass(t, i).clone() + prev[i].clone() * stay
                })
                .collect(),
        };
        table.push(row);
    }
    Ok(table)
}

/// The presence table from the explicit sum-of-products form
/// `Σ_{j≤t} mass_j Π_{j≤k<t} (1 − r_k)`.
pub fn fstar_closed_form<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Vec<Vec<S>>, EvalError> {
    check(m, a)?;
    let table = (0..m.periods())
        .map(|t| {
            m.atoms()
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    (0..=t).fold(S::zero(), |acc, j| {
                        let survive = (j..t).fold(S::one(), |p, k| {
                            p * (S::one() - a.rule(k).level_at(v).clone())
                        });
                        acc + m.mass(j, i).clone() * survive
                    })
                })
                .collect()
        })
        .collect();
    Ok(table)
}

/// Utility curves for periods `0..=T`; the last one is identically zero.
///
/// The slope of period `t`'s curve on a segment is the discounted chance of
/// eventually being served, `δ_t r_t + (1 − r_t)·slope_{t+1}`.
pub fn compute_utilities<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Vec<PiecewiseLinear<S>>, EvalError> {
    check(m, a)?;
    Ok(utilities_on(m, a, &a.refinement(m.atoms())))
}

fn utilities_on<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    part: &Partition<S>,
) -> Vec<PiecewiseLinear<S>> {
    let periods = m.periods();
    let segs = part.segment_count();
    let mut slopes: Vec<Vec<S>> = vec![vec![S::zero(); segs]; periods + 1];
    for t in (0..periods).rev() {
        let delta = m.delta(t);
        let (head, tail) = slopes.split_at_mut(t + 1);
        for ((slot, later), p) in head[t].iter_mut().zip(&tail[0]).zip(part.points()) {
            let r = a.rule(t).level_right_of(p).clone();
            *slot = delta.clone() * r.clone() + (S::one() - r) * later.clone();
        }
    }
    slopes
        .into_iter()
        .map(|s| PiecewiseLinear::from_slopes(part.points().to_vec(), S::zero(), s))
        .collect()
}

/// Expected payment of a truthful bidder of value `v` in period `t`:
/// `(δ_t v r_t(v) + (1 − r_t(v)) U_{t+1}(v) − U_t(v)) / λB_t`.
pub fn payment_at<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    utilities: &[PiecewiseLinear<S>],
    t: usize,
    v: &S,
) -> S {
    let r = a.rule(t).level_at(v).clone();
    if r.is_zero() {
        return S::zero();
    }
    let gross = m.delta(t).clone() * v.clone() * r.clone()
        + (S::one() - r) * utilities[t + 1].value_at(v)
        - utilities[t].value_at(v);
    gross / m.lambda_b(t).clone()
}

fn payments_from<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    utilities: &[PiecewiseLinear<S>],
) -> Vec<Vec<S>> {
    (0..m.periods())
        .map(|t| {
            m.atoms()
                .iter()
                .map(|v| payment_at(m, a, utilities, t, v))
                .collect()
        })
        .collect()
}

/// `p[t][i]`: expected payment of a truthful value-`v_i` bidder in period `t`,
/// already divided by the buyer's money discount.
pub fn compute_payments<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Vec<Vec<S>>, EvalError> {
    let utilities = compute_utilities(m, a)?;
    Ok(payments_from(m, a, &utilities))
}

fn revenue_from<S: Scalar>(m: &Market<S>, fstar: &[Vec<S>], payments: &[Vec<S>]) -> S {
    (0..m.periods()).fold(S::zero(), |acc, t| {
        let period = fstar[t]
            .iter()
            .zip(&payments[t])
            .fold(S::zero(), |s, (f, p)| s + f.clone() * p.clone());
        acc + m.lambda_s(t).clone() * period
    })
}

fn served_from<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>, fstar: &[Vec<S>]) -> S {
    (0..m.periods()).fold(S::zero(), |acc, t| {
        m.atoms().iter().zip(&fstar[t]).fold(acc, |s, (v, f)| {
            s + a.rule(t).level_at(v).clone() * f.clone()
        })
    })
}

fn welfare_from<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>, fstar: &[Vec<S>]) -> S {
    (0..m.periods()).fold(S::zero(), |acc, t| {
        let period = m
            .atoms()
            .iter()
            .zip(&fstar[t])
            .fold(S::zero(), |s, (v, f)| {
                s + f.clone() * a.rule(t).level_at(v).clone() * v.clone()
            });
        acc + m.delta(t).clone() * period
    })
}

/// Seller revenue `Σ_t λS_t Σ_i p[t][i]·fstar[t][i]`.
pub fn revenue<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>) -> Result<S, EvalError> {
    let fstar = compute_fstar(m, a)?;
    let payments = compute_payments(m, a)?;
    Ok(revenue_from(m, &fstar, &payments))
}

/// Total mass served, `Σ_t Σ_i r_t(v_i)·fstar[t][i]`.
pub fn inventory_used<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>) -> Result<S, EvalError> {
    let fstar = compute_fstar(m, a)?;
    Ok(served_from(m, a, &fstar))
}

/// Total mass served, counted per arrival cohort as the chance of ever
/// being served: `Σ_t Σ_i (1 − Π_{j≥t} (1 − r_j(v_i)))·mass[t][i]`.
pub fn inventory_by_cohort<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<S, EvalError> {
    check(m, a)?;
    let periods = m.periods();
    let mut total = S::zero();
    for (i, v) in m.atoms().iter().enumerate() {
        // never[t] = Π_{j≥t} (1 − r_j(v))
        let mut never = S::one();
        for t in (0..periods).rev() {
            never = never * (S::one() - a.rule(t).level_at(v).clone());
            total = total + (S::one() - never.clone()) * m.mass(t, i).clone();
        }
    }
    Ok(total)
}

/// Social welfare `Σ_t δ_t Σ_i fstar[t][i]·r_t(v_i)·v_i`.
pub fn welfare<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>) -> Result<S, EvalError> {
    let fstar = compute_fstar(m, a)?;
    Ok(welfare_from(m, a, &fstar))
}

/// Aggregate buyer surplus `Σ_t Σ_i U_t(v_i)·mass[t][i]`.
pub fn total_utility<S: Scalar>(m: &Market<S>, a: &AllocationProfile<S>) -> Result<S, EvalError> {
    let utilities = compute_utilities(m, a)?;
    Ok(total_utility_from(m, &utilities))
}

fn total_utility_from<S: Scalar>(m: &Market<S>, utilities: &[PiecewiseLinear<S>]) -> S {
    (0..m.periods()).fold(S::zero(), |acc, t| {
        m.atoms().iter().enumerate().fold(acc, |s, (i, v)| {
            s + utilities[t].value_at(v) * m.mass(t, i).clone()
        })
    })
}

/// Everything the evaluator computes for one profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation<S> {
    pub fstar: Vec<Vec<S>>,
    /// Periods `0..=T`; the last curve is identically zero.
    pub utilities: Vec<PiecewiseLinear<S>>,
    pub payments: Vec<Vec<S>>,
    pub revenue: S,
    pub inventory_used: S,
    pub welfare: S,
}

impl<S: Scalar> Evaluation<S> {
    /// `U_t(v_i)` at every atom, periods `0..=T`.
    pub fn utilities_at_atoms(&self, atoms: &[S]) -> Vec<Vec<S>> {
        self.utilities
            .iter()
            .map(|u| atoms.iter().map(|v| u.value_at(v)).collect())
            .collect()
    }
}

pub fn evaluate<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Evaluation<S>, EvalError> {
    let fstar = compute_fstar(m, a)?;
    let utilities = utilities_on(m, a, &a.refinement(m.atoms()));
    let payments = payments_from(m, a, &utilities);
    let revenue = revenue_from(m, &fstar, &payments);
    let inventory_used = served_from(m, a, &fstar);
    debug_assert!({
        let by_cohort = inventory_by_cohort(m, a)?;
        let scale = 1.0 + m.total_mass().to_f64().abs();
        inventory_used.approx_eq(&by_cohort, 1e-9 * scale)
    });
    let welfare = welfare_from(m, a, &fstar);
    Ok(Evaluation {
        fstar,
        utilities,
        payments,
        revenue,
        inventory_used,
        welfare,
    })
}

/// Revenue and inventory only, skipping the tables callers do not need.
pub fn revenue_and_inventory<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<(S, S), EvalError> {
    let fstar = compute_fstar(m, a)?;
    let utilities = utilities_on(m, a, &a.refinement(m.atoms()));
    let payments = payments_from(m, a, &utilities);
    Ok((
        revenue_from(m, &fstar, &payments),
        served_from(m, a, &fstar),
    ))
}

/// Utilities at atoms (periods `0..=T`) from the backward recursion with an
/// explicit best report: in each period the buyer picks the most valuable
/// item of the menu `{(r_t(w), p_t(w))}` given next period's continuation,
/// with payments from [`payment_at`]. Agrees with [`compute_utilities`]
/// exactly when truthful reporting is optimal.
pub fn recursive_utilities<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
) -> Result<Vec<Vec<S>>, EvalError> {
    let utilities = compute_utilities(m, a)?;
    let periods = m.periods();
    let n = m.atom_count();
    let mut table = vec![vec![S::zero(); n]; periods + 1];
    for t in (0..periods).rev() {
        let menu: Vec<(S, S)> = report_points(a.rule(t))
            .iter()
            .map(|w| {
                let level = a.rule(t).level_at(w).clone();
                let price = payment_at(m, a, &utilities, t, w);
                (level, price)
            })
            .collect();
        for (i, v) in m.atoms().iter().enumerate() {
            let next = table[t + 1][i].clone();
            let best = menu
                .iter()
                .map(|(r, p)| {
                    m.delta(t).clone() * v.clone() * r.clone() - m.lambda_b(t).clone() * p.clone()
                        + (S::one() - r.clone()) * next.clone()
                })
                .max_by(|x, y| x.total_cmp(y))
                .expect("menu contains the report 0");
            table[t][i] = best;
        }
    }
    Ok(table)
}

/// One report per level piece of `f`: 0, every jump location, and a point
/// strictly inside each gap between consecutive locations.
fn report_points<S: Scalar>(f: &StepFunction<S>) -> Vec<S> {
    let mut locs: Vec<S> = vec![S::zero()];
    locs.extend(f.jumps().iter().map(|j| j.at.clone()));
    locs.push(S::one());
    locs.dedup();
    let mut out = locs.clone();
    out.extend(
        locs.windows(2)
            .map(|w| (w[0].clone() + w[1].clone()) * S::half()),
    );
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::{parse_market, DiscountSchedule, Inventory, MarketSpec};
    use crate::scalar::Rational;
    use crate::stepfn::Jump;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    fn ration() -> (Market<Rational>, AllocationProfile<Rational>) {
        let m = parse_market(
            r#"{"T":2,"atoms":["2/3",1],"mass":[[0,1],[1,0]],"inventory":"3/2","delta":[1,1]}"#,
        )
        .unwrap();
        let a = AllocationProfile::new(vec![
            StepFunction::indicator(Jump::closed(q(1, 1))),
            StepFunction::scaled(Jump::closed(q(2, 3)), q(1, 2)).unwrap(),
        ]);
        (m, a)
    }

    fn twogen() -> Market<Rational> {
        parse_market(
            r#"{"T":2,"atoms":["1/2",1],"mass":[[0,1],[1,0]],"inventory":"inf","delta":[1,1]}"#,
        )
        .unwrap()
    }

    #[test]
    fn presence_with_nobody_served() {
        let m = twogen();
        let f = compute_fstar(&m, &AllocationProfile::zero(2)).unwrap();
        assert_eq!(f[1], vec![q(1, 1), q(1, 1)]);
    }

    #[test]
    fn presence_after_first_period_sale() {
        let (m, a) = ration();
        let f = compute_fstar(&m, &a).unwrap();
        assert_eq!(f[1], vec![q(1, 1), q(0, 1)]);
        assert_eq!(f, fstar_closed_form(&m, &a).unwrap());
    }

    #[test]
    fn presence_when_everyone_served_on_arrival() {
        let (m, _) = ration();
        let f = compute_fstar(&m, &AllocationProfile::ones(2)).unwrap();
        assert_eq!(f[0], m.arrivals(0).to_vec());
        assert_eq!(f[1], m.arrivals(1).to_vec());
    }

    #[test]
    fn rationing_profile_figures() {
        let (m, a) = ration();
        let e = evaluate(&m, &a).unwrap();
        assert_eq!(e.utilities[1].value_at(&q(1, 1)), q(1, 6));
        assert_eq!(e.utilities[0].value_at(&q(1, 1)), q(1, 6));
        assert_eq!(e.payments[0][1], q(5, 6));
        assert_eq!(e.payments[1][0], q(1, 3));
        assert_eq!(e.revenue, q(7, 6));
        assert_eq!(e.inventory_used, q(3, 2));
        assert_eq!(inventory_by_cohort(&m, &a).unwrap(), q(3, 2));
        assert_eq!(e.welfare, q(4, 3));
        assert_eq!(e.welfare, e.revenue + total_utility(&m, &a).unwrap());
    }

    #[test]
    fn two_generation_posted_prices() {
        let m = twogen();
        let a = AllocationProfile::new(vec![
            StepFunction::indicator(Jump::closed(q(1, 1))),
            StepFunction::indicator(Jump::closed(q(1, 2))),
        ]);
        assert_eq!(revenue(&m, &a).unwrap(), q(1, 1));
        let p = compute_payments(&m, &a).unwrap();
        assert_eq!(p[0][1], q(1, 2));
        assert_eq!(p[1][0], q(1, 2));
    }

    #[test]
    fn zero_profile_is_inert() {
        let (m, _) = ration();
        let a = AllocationProfile::zero(2);
        let e = evaluate(&m, &a).unwrap();
        assert!(e
            .utilities
            .iter()
            .all(|u| u.values().iter().all(|x| x == &q(0, 1))));
        assert!(e.payments.iter().flatten().all(|p| p == &q(0, 1)));
        assert_eq!(e.revenue, q(0, 1));
        assert_eq!(e.inventory_used, q(0, 1));
        assert_eq!(e.welfare, q(0, 1));
    }

    #[test]
    fn free_item_in_last_period() {
        let spec = MarketSpec {
            periods: 3,
            atoms: vec![q(1, 4), q(3, 4)],
            mass: vec![vec![q(1, 1), q(1, 2)]; 3],
            inventory: Inventory::Unbounded,
            discounts: DiscountSchedule::with_delta(vec![q(1, 1), q(3, 4), q(1, 2)]),
        };
        let m = crate::market::validate_market(spec).unwrap();
        let a = AllocationProfile::new(vec![
            StepFunction::zero(),
            StepFunction::zero(),
            StepFunction::one(),
        ]);
        let u = compute_utilities(&m, &a).unwrap();
        for curve in &u[..3] {
            for v in [q(1, 4), q(1, 2), q(1, 1)] {
                assert_eq!(curve.value_at(&v), q(1, 2) * v.clone());
            }
        }
    }

    #[test]
    fn first_period_only_serves_first_arrivals() {
        let (m, _) = ration();
        let a = AllocationProfile::new(vec![StepFunction::one(), StepFunction::zero()]);
        assert_eq!(inventory_used(&m, &a).unwrap(), q(1, 1));
    }

    #[test]
    fn single_buyer_welfare() {
        let spec = MarketSpec {
            periods: 1,
            atoms: vec![q(3, 5)],
            mass: vec![vec![q(1, 1)]],
            inventory: Inventory::Unbounded,
            discounts: DiscountSchedule::with_delta(vec![q(4, 5)]),
        };
        let m = crate::market::validate_market(spec).unwrap();
        let w = welfare(&m, &AllocationProfile::ones(1)).unwrap();
        assert_eq!(w, q(12, 25));
    }

    #[test]
    fn recursion_matches_integral_on_fixture() {
        let (m, a) = ration();
        let rec = recursive_utilities(&m, &a).unwrap();
        let e = evaluate(&m, &a).unwrap();
        assert_eq!(rec, e.utilities_at_atoms(m.atoms()));
    }

    #[test]
    fn mismatched_profile_is_rejected() {
        let (m, _) = ration();
        assert_eq!(
            revenue(&m, &AllocationProfile::zero(3)),
            Err(EvalError::ProfileLength {
                expected: 2,
                found: 3
            })
        );
    }

    #[test]
    fn payments_scale_with_buyer_discount() {
        let (m, a) = ration();
        let mut d = m.discounts().clone();
        d.lambda_b = vec![q(1, 1), q(1, 2)];
        let m2 = m.with_discounts(d).unwrap();
        let p = compute_payments(&m, &a).unwrap();
        let p2 = compute_payments(&m2, &a).unwrap();
        assert_eq!(p2[0], p[0]);
        assert_eq!(p2[1][0], p[1][0].clone() * q(2, 1));
    }
}
