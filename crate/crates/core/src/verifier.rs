//! Independent check of a priced menu: each buyer type's best response by
//! backward induction, the resulting market flows, and reconciliation with
//! the closed-form evaluation.

use std::fmt;

use crate::evaluator::{evaluate, AllocationProfile};
use crate::market::Market;
use crate::mechanism::PricedMechanism;
use crate::scalar::{render, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Action {
    BuyHigh,
    EnterLottery,
    Wait,
}

impl Action {
    pub fn as_str(&self) -> &'static str {
        match self {
            Action::BuyHigh => "buyHigh",
            Action::EnterLottery => "enterLottery",
            Action::Wait => "wait",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumReport<S> {
    /// `plan[t][i]`: action of a value-`v_i` buyer present in period `t`.
    pub plan: Vec<Vec<Action>>,
    /// Continuation utility of a value-`v_i` buyer present in period `t`.
    pub utility: Vec<Vec<S>>,
    /// Chosen utility minus the best alternative; `None` when waiting is the
    /// only action.
    pub ic_slack: Vec<Vec<Option<S>>>,
    /// Mass present per period and atom under the plan.
    pub present: Vec<Vec<S>>,
    /// Mass entering each period's lottery.
    pub demand: Vec<Option<S>>,
    /// Stocked quantity minus service probability times demand.
    pub service_residual: Vec<Option<S>>,
    /// Seller revenue, discounted by the seller's money discount.
    pub realized_revenue: S,
    pub realized_sales: S,
}

/// Best responses of every buyer type to the menu, by backward induction.
///
/// A buyer compares buying at the posted price (`δ_t v − λB_t p`), entering
/// the lottery (`r(δ_t v − λB_t p̄) + (1 − r)·continuation`) and waiting.
/// Utilities within `tol` of the best count as ties. Ties go to the
/// seller-preferred action (posted, then lottery, then waiting), skipping a
/// tier whose threshold does not admit the buyer's value.
pub fn best_response<S: Scalar>(
    m: &Market<S>,
    mech: &PricedMechanism<S>,
    tol: f64,
) -> EquilibriumReport<S> {
    let periods = m.periods().min(mech.periods.len());
    let n = m.atom_count();
    let mut plan = vec![vec![Action::Wait; n]; periods];
    let mut utility = vec![vec![S::zero(); n]; periods + 1];
    let mut ic_slack = vec![vec![None; n]; periods];

    for t in (0..periods).rev() {
        let menu = &mech.periods[t];
        let delta = m.delta(t).clone();
        let lambda_b = m.lambda_b(t).clone();
        for (i, v) in m.atoms().iter().enumerate() {
            let wait = utility[t + 1][i].clone();
            let surplus = |price: &S| delta.clone() * v.clone() - lambda_b.clone() * price.clone();
            let mut options: Vec<(Action, S, bool)> = Vec::with_capacity(3);
            if let Some(p) = &menu.posted {
                options.push((Action::BuyHigh, surplus(&p.price), p.threshold.admits(v)));
            }
            if let Some(l) = &menu.lottery {
                let r = l.service_prob.clone();
                let u = r.clone() * surplus(&l.per_winner_price) + (S::one() - r) * wait.clone();
                options.push((Action::EnterLottery, u, l.threshold.admits(v)));
            }
            options.push((Action::Wait, wait, true));

            let top = options
                .iter()
                .map(|o| o.1.clone())
                .max_by(|a, b| a.total_cmp(b))
                .expect("waiting is always available");
            let near = |u: &S| u.approx_eq(&top, tol) || *u >= top;
            let chosen = options
                .iter()
                .position(|(_, u, ok)| *ok && near(u))
                .or_else(|| options.iter().position(|(_, u, _)| *u == top))
                .expect("some option attains the maximum");
            let best_other = options
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != chosen)
                .map(|(_, o)| o.1.clone())
                .max_by(|a, b| a.total_cmp(b));
            plan[t][i] = options[chosen].0;
            ic_slack[t][i] = best_other.map(|b| options[chosen].1.clone() - b);
            utility[t][i] = options[chosen].1.clone();
        }
    }
    utility.truncate(periods);

    let mut present = Vec::with_capacity(periods);
    let mut demand = vec![None; periods];
    let mut service_residual = vec![None; periods];
    let mut revenue = S::zero();
    let mut sales = S::zero();
    let mut carry = vec![S::zero(); n];
    for t in 0..periods {
        let here: Vec<S> = (0..n)
            .map(|i| m.mass(t, i).clone() + carry[i].clone())
            .collect();
        let menu = &mech.periods[t];
        let mut period_revenue = S::zero();
        let mut entrants = S::zero();
        for i in 0..n {
            let mass = here[i].clone();
            let served = match plan[t][i] {
                Action::BuyHigh => {
                    let p = menu.posted.as_ref().expect("planned tier exists");
                    period_revenue = period_revenue + p.price.clone() * mass.clone();
                    mass.clone()
                }
                Action::EnterLottery => {
                    let l = menu.lottery.as_ref().expect("planned tier exists");
                    entrants = entrants + mass.clone();
                    let won = l.service_prob.clone() * mass.clone();
                    period_revenue = period_revenue + l.per_winner_price.clone() * won.clone();
                    won
                }
                Action::Wait => S::zero(),
            };
            sales = sales + served.clone();
            carry[i] = mass - served;
        }
        if let Some(l) = &menu.lottery {
            service_residual[t] =
                Some(l.quantity.clone() - l.service_prob.clone() * entrants.clone());
            demand[t] = Some(entrants);
        }
        revenue = revenue + m.lambda_s(t).clone() * period_revenue;
        present.push(here);
    }

    EquilibriumReport {
        plan,
        utility,
        ic_slack,
        present,
        demand,
        service_residual,
        realized_revenue: revenue,
        realized_sales: sales,
    }
}

/// A failed verification check. Periods and atoms are 1-based.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Shape {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    PlanDeviates {
        period: usize,
        atom: usize,
        action: Action,
        intended: String,
    },
    ServiceResidual {
        period: usize,
        residual: String,
    },
    RevenueMismatch {
        realized: String,
        formula: String,
    },
    Oversold {
        sold: String,
        cap: String,
    },
    IncentiveSlack {
        period: usize,
        atom: usize,
        slack: String,
    },
    NegativeUtility {
        period: usize,
        atom: usize,
        utility: String,
    },
    UtilityMismatch {
        period: usize,
        atom: usize,
        simulated: String,
        formula: String,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Shape {
                what,
                expected,
                found,
            } => write!(f, "{what} has {found} periods, market has {expected}"),
            Violation::PlanDeviates {
                period,
                atom,
                action,
                intended,
            } => write!(
                f,
                "period {period}, atom {atom}: buyers {action}, allocation intends {intended}"
            ),
            Violation::ServiceResidual { period, residual } => {
                write!(f, "period {period}: lottery quantity off by {residual}")
            }
            Violation::RevenueMismatch { realized, formula } => {
                write!(f, "realized revenue {realized} differs from formula revenue {formula}")
            }
            Violation::Oversold { sold, cap } => write!(f, "sold {sold} exceeds inventory {cap}"),
            Violation::IncentiveSlack { period, atom, slack } => {
                write!(f, "period {period}, atom {atom}: incentive slack {slack} is negative")
            }
            Violation::NegativeUtility {
                period,
                atom,
                utility,
            } => write!(f, "period {period}, atom {atom}: utility {utility} is negative"),
            Violation::UtilityMismatch {
                period,
                atom,
                simulated,
                formula,
            } => write!(
                f,
                "period {period}, atom {atom}: simulated utility {simulated} differs from formula {formula}"
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Verification<S> {
    pub report: EquilibriumReport<S>,
    pub violations: Vec<Violation>,
}

impl<S> Verification<S> {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn close<S: Scalar>(x: &S, y: &S, tol: f64) -> bool {
    x.approx_eq(y, tol * (1.0 + y.to_f64().abs()))
}

/// Simulates best responses to `mech` and checks them against profile `a`:
/// the plan implements `a`, lotteries are stocked for their demand, revenue
/// and utilities match the closed-form evaluation, supply is respected and
/// every choice is incentive compatible and individually rational.
pub fn verify<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    mech: &PricedMechanism<S>,
    tol: f64,
) -> Verification<S> {
    let report = best_response(m, mech, tol);
    let mut violations = Vec::new();
    for (what, found) in [("mechanism", mech.periods.len()), ("profile", a.periods())] {
        if found != m.periods() {
            violations.push(Violation::Shape {
                what,
                expected: m.periods(),
                found,
            });
        }
    }
    if !violations.is_empty() {
        return Verification { report, violations };
    }
    let eval = evaluate(m, a).expect("shapes checked above");

    for t in 0..m.periods() {
        for (i, v) in m.atoms().iter().enumerate() {
            let intended = a.rule(t).level_at(v);
            let implied = match report.plan[t][i] {
                Action::BuyHigh => S::one(),
                Action::EnterLottery => mech.periods[t]
                    .lottery
                    .as_ref()
                    .map_or_else(S::zero, |l| l.service_prob.clone()),
                Action::Wait => S::zero(),
            };
            if !implied.approx_eq(intended, tol) {
                violations.push(Violation::PlanDeviates {
                    period: t + 1,
                    atom: i + 1,
                    action: report.plan[t][i],
                    intended: render(intended),
                });
            }
        }
        if let Some(residual) = &report.service_residual[t] {
            if !residual.approx_eq(&S::zero(), tol * (1.0 + m.total_mass().to_f64())) {
                violations.push(Violation::ServiceResidual {
                    period: t + 1,
                    residual: render(residual),
                });
            }
        }
    }
    if !close(&report.realized_revenue, &eval.revenue, tol) {
        violations.push(Violation::RevenueMismatch {
            realized: render(&report.realized_revenue),
            formula: render(&eval.revenue),
        });
    }
    if !m.inventory().admits(&report.realized_sales, tol) {
        violations.push(Violation::Oversold {
            sold: render(&report.realized_sales),
            cap: m.inventory().bound().map_or_else(|| "inf".into(), render),
        });
    }
    for t in 0..m.periods() {
        for (i, v) in m.atoms().iter().enumerate() {
            if let Some(slack) = &report.ic_slack[t][i] {
                if slack.is_negative() && !slack.approx_eq(&S::zero(), tol) {
                    violations.push(Violation::IncentiveSlack {
                        period: t + 1,
                        atom: i + 1,
                        slack: render(slack),
                    });
                }
            }
            let u = &report.utility[t][i];
            if u.is_negative() && !u.approx_eq(&S::zero(), tol) {
                violations.push(Violation::NegativeUtility {
                    period: t + 1,
                    atom: i + 1,
                    utility: render(u),
                });
            }
            let formula = eval.utilities[t].value_at(v);
            if !close(u, &formula, tol) {
                violations.push(Violation::UtilityMismatch {
                    period: t + 1,
                    atom: i + 1,
                    simulated: render(u),
                    formula: render(&formula),
                });
            }
        }
    }
    Verification { report, violations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::parse_market;
    use crate::mechanism::{extract, PeriodMenu};
    use crate::scalar::Rational;
    use crate::stepfn::{Jump, StepFunction};

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

    #[test]
    fn rationing_menu_best_responses() {
        let (m, a) = ration();
        let mech = extract(&m, &a, 1e-9).unwrap();
        let rep = best_response(&m, &mech, 1e-9);
        assert_eq!(rep.plan[0][1], Action::BuyHigh);
        assert_eq!(rep.utility[0][1], q(1, 6));
        assert_eq!(rep.ic_slack[0][1], Some(q(0, 1)));
        assert_eq!(rep.plan[1][0], Action::EnterLottery);
        assert_eq!(rep.utility[1][0], q(0, 1));
        assert_eq!(rep.realized_revenue, q(7, 6));
        assert_eq!(rep.realized_sales, q(3, 2));
        assert_eq!(rep.demand, vec![None, Some(q(1, 1))]);
        assert!(verify(&m, &a, &mech, 1e-9).passed());
    }

    #[test]
    fn all_closed_means_everyone_waits() {
        let (m, _) = ration();
        let mech = PricedMechanism {
            periods: vec![PeriodMenu::closed(), PeriodMenu::closed()],
        };
        let rep = best_response(&m, &mech, 1e-9);
        assert!(rep.plan.iter().flatten().all(|a| *a == Action::Wait));
        assert!(rep.utility.iter().flatten().all(|u| *u == q(0, 1)));
        assert_eq!(rep.realized_revenue, q(0, 1));
        assert!(rep.ic_slack.iter().flatten().all(Option::is_none));
    }

    #[test]
    fn raised_first_price_is_caught() {
        let (m, a) = ration();
        let mut mech = extract(&m, &a, 1e-9).unwrap();
        mech.periods[0].posted.as_mut().unwrap().price = q(5, 6) + q(1, 100);
        let out = verify(&m, &a, &mech, 1e-9);
        assert!(!out.passed());
        assert_eq!(out.report.plan[0][1], Action::Wait);
        assert!(out.report.realized_revenue < q(7, 6));
        assert!(out.violations.iter().any(|v| matches!(
            v,
            Violation::PlanDeviates {
                period: 1,
                atom: 2,
                ..
            }
        )));
    }

    #[test]
    fn two_generation_menu_passes() {
        let m: Market<Rational> = parse_market(
            r#"{"T":2,"atoms":["1/2",1],"mass":[[0,1],[1,0]],"inventory":"inf","delta":[1,1]}"#,
        )
        .unwrap();
        let a = AllocationProfile::new(vec![
            StepFunction::indicator(Jump::closed(q(1, 1))),
            StepFunction::indicator(Jump::closed(q(1, 2))),
        ]);
        let mech = extract(&m, &a, 1e-9).unwrap();
        let out = verify(&m, &a, &mech, 1e-9);
        assert!(out.passed(), "{:?}", out.violations);
        assert_eq!(out.report.realized_revenue, q(1, 1));
    }
}
