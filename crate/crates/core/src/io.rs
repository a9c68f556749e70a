//! File formats: allocation profiles and mechanisms as JSON, evaluation,
//! price-path and verification tables as CSV.
//!
//! JSON numbers are written exactly (fractions as `"p/q"` strings for the
//! rational backend). CSV values are decimals, for plotting.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluator::{AllocationProfile, Evaluation};
use crate::market::{raw, Market, MarketError, RawNumber};
use crate::mechanism::{LotteryTier, PeriodMenu, PostedTier, PricedMechanism, Threshold};
use crate::scalar::Scalar;
use crate::stepfn::{Inclusion, Jump, StepError, StepFunction};
use crate::verifier::EquilibriumReport;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error("period {period}: {source}")]
    Step { period: usize, source: StepError },
}

impl From<MarketError> for FormatError {
    fn from(e: MarketError) -> Self {
        match e {
            MarketError::Field { field, message } => FormatError::Field { field, message },
            other => FormatError::Field {
                field: String::new(),
                message: other.to_string(),
            },
        }
    }
}

fn syntax(e: serde_json::Error) -> FormatError {
    FormatError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

/// Decimal rendering used in CSV tables.
pub fn decimal<S: Scalar>(x: &S) -> String {
    format!("{}", x.to_f64())
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    t: usize,
    levels: Vec<RawNumber>,
    jumps: Vec<RawNumber>,
    flags: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawProfile {
    periods: Vec<RawRule>,
}

/// Profile document: one entry per period with `levels`, jump locations
/// `jumps` and inclusion `flags` (`"closed"` or `"open"`).
pub fn serialize_profile<S: Scalar>(a: &AllocationProfile<S>) -> String {
    let periods = a
        .rules()
        .iter()
        .enumerate()
        .map(|(t, r)| RawRule {
            t: t + 1,
            levels: r.levels().iter().map(raw).collect(),
            jumps: r.jumps().iter().map(|j| raw(&j.at)).collect(),
            flags: r
                .jumps()
                .iter()
                .map(|j| match j.inclusion {
                    Inclusion::Closed => "closed".to_string(),
                    Inclusion::Open => "open".to_string(),
                })
                .collect(),
        })
        .collect();
    serde_json::to_string_pretty(&RawProfile { periods }).expect("profiles serialize") + "\n"
}

pub fn parse_profile<S: Scalar>(text: &str) -> Result<AllocationProfile<S>, FormatError> {
    let doc: RawProfile = serde_json::from_str(text).map_err(syntax)?;
    let mut rules = Vec::with_capacity(doc.periods.len());
    for (k, rule) in doc.periods.iter().enumerate() {
        if rule.t != k + 1 {
            return Err(FormatError::Field {
                field: format!("periods[{k}].t"),
                message: format!("expected period {}, found {}", k + 1, rule.t),
            });
        }
        if rule.flags.len() != rule.jumps.len() {
            return Err(FormatError::Field {
                field: format!("periods[{k}].flags"),
                message: "one flag per jump is required".into(),
            });
        }
        let mut jumps = Vec::with_capacity(rule.jumps.len());
        for (j, (at, flag)) in rule.jumps.iter().zip(&rule.flags).enumerate() {
            let at: S = at.scalar(&format!("periods[{k}].jumps[{j}]"))?;
            let inclusion = match flag.as_str() {
                "closed" => Inclusion::Closed,
                "open" => Inclusion::Open,
                other => {
                    return Err(FormatError::Field {
                        field: format!("periods[{k}].flags[{j}]"),
                        message: format!("expected \"closed\" or \"open\", found {other:?}"),
                    })
                }
            };
            jumps.push(Jump { at, inclusion });
        }
        let levels = rule
            .levels
            .iter()
            .enumerate()
            .map(|(j, l)| l.scalar(&format!("periods[{k}].levels[{j}]")))
            .collect::<Result<Vec<S>, _>>()?;
        let f = StepFunction::from_parts(jumps, levels).map_err(|source| FormatError::Step {
            period: k + 1,
            source,
        })?;
        rules.push(f);
    }
    Ok(AllocationProfile::new(rules))
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "camelCase")]
struct RawMenu {
    t: usize,
    mode: String,
    q_high: Option<RawNumber>,
    q_high_inclusive: Option<bool>,
    p_high: Option<RawNumber>,
    q_low: Option<RawNumber>,
    q_low_inclusive: Option<bool>,
    service_prob: Option<RawNumber>,
    per_winner_price: Option<RawNumber>,
    lottery_quantity: Option<RawNumber>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMechanism {
    periods: Vec<RawMenu>,
}

/// Mechanism document: per period the mode, the posted tier (`qHigh`,
/// `qHighInclusive`, `pHigh`) and the lottery tier (`qLow`,
/// `qLowInclusive`, `serviceProb`, `perWinnerPrice`, `lotteryQuantity`);
/// absent tiers are `null`.
pub fn serialize_mechanism<S: Scalar>(mech: &PricedMechanism<S>) -> String {
    let periods = mech
        .periods
        .iter()
        .enumerate()
        .map(|(t, menu)| {
            let posted = menu.posted.as_ref();
            let lottery = menu.lottery.as_ref();
            RawMenu {
                t: t + 1,
                mode: menu.mode().as_str().to_string(),
                q_high: posted.map(|p| raw(&p.threshold.at)),
                q_high_inclusive: posted.map(|p| p.threshold.inclusive),
                p_high: posted.map(|p| raw(&p.price)),
                q_low: lottery.map(|l| raw(&l.threshold.at)),
                q_low_inclusive: lottery.map(|l| l.threshold.inclusive),
                service_prob: lottery.map(|l| raw(&l.service_prob)),
                per_winner_price: lottery.map(|l| raw(&l.per_winner_price)),
                lottery_quantity: lottery.map(|l| raw(&l.quantity)),
            }
        })
        .collect();
    serde_json::to_string_pretty(&RawMechanism { periods }).expect("mechanisms serialize") + "\n"
}

pub fn parse_mechanism<S: Scalar>(text: &str) -> Result<PricedMechanism<S>, FormatError> {
    let doc: RawMechanism = serde_json::from_str(text).map_err(syntax)?;
    let mut periods = Vec::with_capacity(doc.periods.len());
    for (k, menu) in doc.periods.iter().enumerate() {
        let field = |name: &str| format!("periods[{k}].{name}");
        let missing = |name: &str| FormatError::Field {
            field: field(name),
            message: "required by the other fields of this tier".into(),
        };
        let num = |x: &Option<RawNumber>, name: &str| -> Result<Option<S>, FormatError> {
            x.as_ref()
                .map(|r| r.scalar(&field(name)))
                .transpose()
                .map_err(Into::into)
        };

        let posted = match num(&menu.p_high, "pHigh")? {
            None => None,
            Some(price) => Some(PostedTier {
                threshold: Threshold {
                    at: num(&menu.q_high, "qHigh")?.ok_or_else(|| missing("qHigh"))?,
                    inclusive: menu.q_high_inclusive.unwrap_or(true),
                },
                price,
            }),
        };
        let lottery = match num(&menu.per_winner_price, "perWinnerPrice")? {
            None => None,
            Some(per_winner_price) => Some(LotteryTier {
                threshold: Threshold {
                    at: num(&menu.q_low, "qLow")?.ok_or_else(|| missing("qLow"))?,
                    inclusive: menu.q_low_inclusive.unwrap_or(true),
                },
                service_prob: num(&menu.service_prob, "serviceProb")?
                    .ok_or_else(|| missing("serviceProb"))?,
                per_winner_price,
                quantity: num(&menu.lottery_quantity, "lotteryQuantity")?
                    .ok_or_else(|| missing("lotteryQuantity"))?,
            }),
        };
        let parsed = PeriodMenu { posted, lottery };
        if parsed.mode().as_str() != menu.mode {
            return Err(FormatError::Field {
                field: field("mode"),
                message: format!(
                    "mode {:?} does not match the tiers present ({})",
                    menu.mode,
                    parsed.mode().as_str()
                ),
            });
        }
        periods.push(parsed);
    }
    Ok(PricedMechanism { periods })
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("utf-8 records")
}

/// Evaluation table: `t, v, fstar, r, U, p, cashflow` per period and atom,
/// where `cashflow` is the seller-discounted payment times presence.
pub fn evaluation_csv<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    e: &Evaluation<S>,
) -> String {
    let mut rows = vec![["t", "v", "fstar", "r", "U", "p", "cashflow"]
        .map(String::from)
        .to_vec()];
    for t in 0..m.periods() {
        for (i, v) in m.atoms().iter().enumerate() {
            let cash = m.lambda_s(t).clone() * e.payments[t][i].clone() * e.fstar[t][i].clone();
            rows.push(vec![
                (t + 1).to_string(),
                decimal(v),
                decimal(&e.fstar[t][i]),
                decimal(a.rule(t).level_at(v)),
                decimal(&e.utilities[t].value_at(v)),
                decimal(&e.payments[t][i]),
                decimal(&cash),
            ]);
        }
    }
    csv_string(rows)
}

/// Price path: `t, pHigh, perWinnerPrice, lotteryQuantity`, blank where a
/// tier is absent.
pub fn prices_csv<S: Scalar>(mech: &PricedMechanism<S>) -> String {
    let mut rows = vec![["t", "pHigh", "perWinnerPrice", "lotteryQuantity"]
        .map(String::from)
        .to_vec()];
    for (t, menu) in mech.periods.iter().enumerate() {
        let posted = menu.posted.as_ref();
        let lottery = menu.lottery.as_ref();
        rows.push(vec![
            (t + 1).to_string(),
            posted.map(|p| decimal(&p.price)).unwrap_or_default(),
            lottery
                .map(|l| decimal(&l.per_winner_price))
                .unwrap_or_default(),
            lottery.map(|l| decimal(&l.quantity)).unwrap_or_default(),
        ]);
    }
    csv_string(rows)
}

/// Best-response table: `t, v, action, utility, icSlack`.
pub fn verification_csv<S: Scalar>(m: &Market<S>, r: &EquilibriumReport<S>) -> String {
    let mut rows = vec![["t", "v", "action", "utility", "icSlack"]
        .map(String::from)
        .to_vec()];
    for t in 0..r.plan.len() {
        for (i, v) in m.atoms().iter().enumerate() {
            rows.push(vec![
                (t + 1).to_string(),
                decimal(v),
                r.plan[t][i].to_string(),
                decimal(&r.utility[t][i]),
                r.ic_slack[t][i].as_ref().map(decimal).unwrap_or_default(),
            ]);
        }
    }
    csv_string(rows)
}
