//! Turning an allocation profile into a menu per period: a posted price,
//! a rationed lottery, both, or nothing.

use thiserror::Error;

use crate::evaluator::{compute_fstar, evaluate, AllocationProfile, EvalError};
use crate::market::Market;
use crate::scalar::{render, Scalar};
use crate::stepfn::{Inclusion, Jump, StepFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExtractError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("period {period} allocation has {steps} steps; at most 2 can be priced")]
    TooManySteps { period: usize, steps: usize },
    #[error("period {period} allocation has two steps but its top level {top} is below 1")]
    TopLevelBelowOne { period: usize, top: String },
    #[error("period {period} {tier} price {price} is negative")]
    NegativePrice {
        period: usize,
        tier: &'static str,
        price: String,
    },
}

/// Lowest value admitted to a tier: `v ≥ at` when inclusive, `v > at`
/// otherwise. Only consulted to settle exact indifference.
#[derive(Debug, Clone, PartialEq)]
pub struct Threshold<S> {
    pub at: S,
    pub inclusive: bool,
}

impl<S: Scalar> Threshold<S> {
    pub fn admits(&self, v: &S) -> bool {
        if self.inclusive {
            *v >= self.at
        } else {
            *v > self.at
        }
    }

    fn from_jump(jump: &Jump<S>) -> Self {
        Threshold {
            at: jump.at.clone(),
            inclusive: jump.inclusion == Inclusion::Closed,
        }
    }
}

/// Take-it-or-leave-it price with certain service.
#[derive(Debug, Clone, PartialEq)]
pub struct PostedTier<S> {
    pub threshold: Threshold<S>,
    pub price: S,
}

/// A fixed quantity sold at `per_winner_price`; entrants are served with
/// probability `service_prob` and losers stay in the market.
#[derive(Debug, Clone, PartialEq)]
pub struct LotteryTier<S> {
    pub threshold: Threshold<S>,
    pub service_prob: S,
    pub per_winner_price: S,
    pub quantity: S,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PeriodMode {
    Closed,
    Posted,
    LotteryOnly,
    PostedLottery,
}

impl PeriodMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            PeriodMode::Closed => "closed",
            PeriodMode::Posted => "posted",
            PeriodMode::LotteryOnly => "lottery-only",
            PeriodMode::PostedLottery => "posted+lottery",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PeriodMenu<S> {
    pub posted: Option<PostedTier<S>>,
    pub lottery: Option<LotteryTier<S>>,
}

impl<S: Scalar> PeriodMenu<S> {
    pub fn closed() -> Self {
        PeriodMenu {
            posted: None,
            lottery: None,
        }
    }

    pub fn mode(&self) -> PeriodMode {
        match (&self.posted, &self.lottery) {
            (None, None) => PeriodMode::Closed,
            (Some(_), None) => PeriodMode::Posted,
            (None, Some(_)) => PeriodMode::LotteryOnly,
            (Some(_), Some(_)) => PeriodMode::PostedLottery,
        }
    }
}

/// One menu per period. Prices are in the buyer's undiscounted money, i.e.
/// already divided by the buyer's money discount.
#[derive(Debug, Clone, PartialEq)]
pub struct PricedMechanism<S> {
    pub periods: Vec<PeriodMenu<S>>,
}

impl<S: Scalar> PricedMechanism<S> {
    pub fn lottery_count(&self) -> usize {
        self.periods.iter().filter(|p| p.lottery.is_some()).count()
    }

    /// The allocation the menu is designed to implement: each tier serves
    /// everyone its threshold admits.
    pub fn implied_profile(&self) -> AllocationProfile<S> {
        let rules = self
            .periods
            .iter()
            .map(|menu| {
                let mut jumps = Vec::new();
                let mut levels = vec![S::zero()];
                if let Some(l) = &menu.lottery {
                    jumps.push(threshold_jump(&l.threshold));
                    levels.push(l.service_prob.clone());
                }
                if let Some(p) = &menu.posted {
                    jumps.push(threshold_jump(&p.threshold));
                    levels.push(S::one());
                }
                StepFunction::from_parts(jumps, levels).unwrap_or_else(|_| StepFunction::zero())
            })
            .collect();
        AllocationProfile::new(rules)
    }
}

fn threshold_jump<S: Scalar>(th: &Threshold<S>) -> Jump<S> {
    if th.inclusive {
        Jump::closed(th.at.clone())
    } else {
        Jump::open(th.at.clone())
    }
}

/// Mass of buyers present in period `t` whose allocation equals `level`,
/// times `level`: the quantity a lottery at that level must stock.
fn lottery_quantity<S: Scalar>(
    m: &Market<S>,
    rule: &StepFunction<S>,
    fstar_t: &[S],
    level: &S,
) -> S {
    let demand = m
        .atoms()
        .iter()
        .zip(fstar_t)
        .filter(|(v, _)| rule.level_at(v) == level)
        .fold(S::zero(), |acc, (_, f)| acc + f.clone());
    level.clone() * demand
}

/// Prices the profile period by period. Each threshold buyer is made
/// indifferent: at the lottery threshold between the lottery and waiting,
/// at the posted threshold between the posted price and the lottery (or
/// waiting, when there is no lottery). A one-step rule reaching 1 becomes a
/// posted price; one that stays below 1 becomes a lottery with no posted
/// tier. Prices within `tol` below zero are reported as zero.
pub fn extract<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    tol: f64,
) -> Result<PricedMechanism<S>, ExtractError> {
    let eval = evaluate(m, a)?;
    let mut periods = Vec::with_capacity(m.periods());
    for t in 0..m.periods() {
        let rule = a.rule(t);
        let next = &eval.utilities[t + 1];
        let delta = m.delta(t).clone();
        let lambda_b = m.lambda_b(t).clone();
        // price making a buyer of value q indifferent between certain
        // service now and the continuation
        let margin = |q: &S| (delta.clone() * q.clone() - next.value_at(q)) / lambda_b.clone();
        let checked = |price: S, tier: &'static str| -> Result<S, ExtractError> {
            if price >= S::zero() {
                Ok(price)
            } else if price.approx_eq(&S::zero(), tol) {
                Ok(S::zero())
            } else {
                Err(ExtractError::NegativePrice {
                    period: t + 1,
                    tier,
                    price: render(&price),
                })
            }
        };
        let lottery_at = |jump: &Jump<S>, level: &S| -> Result<LotteryTier<S>, ExtractError> {
            Ok(LotteryTier {
                threshold: Threshold::from_jump(jump),
                service_prob: level.clone(),
                per_winner_price: checked(margin(&jump.at), "lottery")?,
                quantity: lottery_quantity(m, rule, &eval.fstar[t], level),
            })
        };

        let rises = rule.rises();
        let menu = match rises.as_slice() {
            [] => PeriodMenu::closed(),
            [(jump, level)] if level.approx_eq(&S::one(), tol) => PeriodMenu {
                posted: Some(PostedTier {
                    threshold: Threshold::from_jump(jump),
                    price: checked(margin(&jump.at), "posted")?,
                }),
                lottery: None,
            },
            [(jump, level)] => PeriodMenu {
                posted: None,
                lottery: Some(lottery_at(jump, level)?),
            },
            [(low, level), (high, top)] => {
                if !top.approx_eq(&S::one(), tol) {
                    return Err(ExtractError::TopLevelBelowOne {
                        period: t + 1,
                        top: render(top),
                    });
                }
                let lottery = lottery_at(low, level)?;
                let keep = S::one() - level.clone();
                let price =
                    keep * margin(&high.at) + level.clone() * lottery.per_winner_price.clone();
                PeriodMenu {
                    posted: Some(PostedTier {
                        threshold: Threshold::from_jump(high),
                        price: checked(price, "posted")?,
                    }),
                    lottery: Some(lottery),
                }
            }
            more => {
                return Err(ExtractError::TooManySteps {
                    period: t + 1,
                    steps: more.len(),
                })
            }
        };
        periods.push(menu);
    }
    Ok(PricedMechanism { periods })
}

/// Per period with a lottery: stocked quantity minus service probability
/// times the mass whose allocation equals the service probability,
/// recomputed from the presence table.
pub fn lottery_quantity_audit<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    mech: &PricedMechanism<S>,
) -> Result<Vec<Option<S>>, EvalError> {
    let fstar = compute_fstar(m, a)?;
    Ok(mech
        .periods
        .iter()
        .enumerate()
        .map(|(t, menu)| {
            menu.lottery.as_ref().map(|l| {
                let demand = m
                    .atoms()
                    .iter()
                    .zip(&fstar[t])
                    .filter(|(v, _)| *a.rule(t).level_at(v) == l.service_prob)
                    .fold(S::zero(), |acc, (_, f)| acc + f.clone());
                l.quantity.clone() - l.service_prob.clone() * demand
            })
        })
        .collect())
}
