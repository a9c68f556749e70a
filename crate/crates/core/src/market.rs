//! Market instances: periods, value atoms with per-period arrival masses,
//! discount schedules and the inventory cap.
//!
//! A [`MarketSpec`] is an unchecked description; [`validate_market`] turns it
//! into an immutable [`Market`] or reports every violated invariant.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::scalar::{Literal, Scalar};

/// Seller supply. Unlimited supply is its own variant rather than a sentinel.
#[derive(Debug, Clone, PartialEq)]
pub enum Inventory<S> {
    Bounded(S),
    Unbounded,
}

impl<S: Scalar> Inventory<S> {
    pub fn is_bounded(&self) -> bool {
        matches!(self, Inventory::Bounded(_))
    }

    pub fn bound(&self) -> Option<&S> {
        match self {
            Inventory::Bounded(cap) => Some(cap),
            Inventory::Unbounded => None,
        }
    }

    /// Whether `used` fits under the cap, allowing `tol` of slack.
    pub fn admits(&self, used: &S, tol: f64) -> bool {
        match self {
            Inventory::Unbounded => true,
            Inventory::Bounded(cap) => *used <= *cap || used.approx_eq(cap, tol),
        }
    }
}

/// Valuation discounts `delta`, seller cash-flow discounts `lambda_s` and
/// buyer money discounts `lambda_b`, one entry per period.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscountSchedule<S> {
    pub delta: Vec<S>,
    pub lambda_s: Vec<S>,
    pub lambda_b: Vec<S>,
}

impl<S: Scalar> DiscountSchedule<S> {
    /// Valuation discounts only; money is undiscounted.
    pub fn with_delta(delta: Vec<S>) -> Self {
        let ones = vec![S::one(); delta.len()];
        DiscountSchedule {
            delta,
            lambda_s: ones.clone(),
            lambda_b: ones,
        }
    }

    pub fn undiscounted(periods: usize) -> Self {
        Self::with_delta(vec![S::one(); periods])
    }

    /// True when both money discounts are identically one.
    pub fn is_base_model(&self) -> bool {
        self.lambda_s
            .iter()
            .chain(&self.lambda_b)
            .all(|l| l.is_one())
    }
}

/// Unchecked market description.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketSpec<S> {
    pub periods: usize,
    pub atoms: Vec<S>,
    /// `mass[t][i]`: mass of value-`atoms[i]` buyers arriving in period `t`.
    pub mass: Vec<Vec<S>>,
    pub inventory: Inventory<S>,
    pub discounts: DiscountSchedule<S>,
}

/// A validated market. Immutable; periods are indexed from 0 internally.
#[derive(Debug, Clone, PartialEq)]
pub struct Market<S> {
    spec: MarketSpec<S>,
}

impl<S: Scalar> Market<S> {
    pub fn periods(&self) -> usize {
        self.spec.periods
    }

    pub fn atoms(&self) -> &[S] {
        &self.spec.atoms
    }

    pub fn atom_count(&self) -> usize {
        self.spec.atoms.len()
    }

    pub fn mass(&self, t: usize, i: usize) -> &S {
        &self.spec.mass[t][i]
    }

    pub fn arrivals(&self, t: usize) -> &[S] {
        &self.spec.mass[t]
    }

    pub fn inventory(&self) -> &Inventory<S> {
        &self.spec.inventory
    }

    pub fn discounts(&self) -> &DiscountSchedule<S> {
        &self.spec.discounts
    }

    pub fn delta(&self, t: usize) -> &S {
        &self.spec.discounts.delta[t]
    }

    pub fn lambda_s(&self, t: usize) -> &S {
        &self.spec.discounts.lambda_s[t]
    }

    pub fn lambda_b(&self, t: usize) -> &S {
        &self.spec.discounts.lambda_b[t]
    }

    pub fn total_mass(&self) -> S {
        self.spec
            .mass
            .iter()
            .flatten()
            .fold(S::zero(), |acc, m| acc + m.clone())
    }

    pub fn spec(&self) -> &MarketSpec<S> {
        &self.spec
    }

    /// Same market with a different inventory.
    pub fn with_inventory(&self, inventory: Inventory<S>) -> Result<Self, Violations> {
        let mut spec = self.spec.clone();
        spec.inventory = inventory;
        validate_market(spec)
    }

    /// Same market with different discount schedules.
    pub fn with_discounts(&self, discounts: DiscountSchedule<S>) -> Result<Self, Violations> {
        let mut spec = self.spec.clone();
        spec.discounts = discounts;
        validate_market(spec)
    }

    /// Converts to another backend (exact values are rounded when going to floats).
    pub fn convert<T: Scalar>(&self) -> Market<T> {
        let conv = |x: &S| T::from_literal(&literal_of(x));
        let convs = |xs: &[S]| xs.iter().map(conv).collect::<Vec<_>>();
        let spec = &self.spec;
        Market {
            spec: MarketSpec {
                periods: spec.periods,
                atoms: convs(&spec.atoms),
                mass: spec.mass.iter().map(|row| convs(row)).collect(),
                inventory: match &spec.inventory {
                    Inventory::Bounded(cap) => Inventory::Bounded(conv(cap)),
                    Inventory::Unbounded => Inventory::Unbounded,
                },
                discounts: DiscountSchedule {
                    delta: convs(&spec.discounts.delta),
                    lambda_s: convs(&spec.discounts.lambda_s),
                    lambda_b: convs(&spec.discounts.lambda_b),
                },
            },
        }
    }
}

fn literal_of<S: Scalar>(x: &S) -> Literal {
    let text = crate::scalar::render(x);
    text.parse().expect("rendered scalars are valid literals")
}

/// A single violated market invariant. Periods and atoms are 1-based in
/// messages.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Violation {
    #[error("market needs at least one period")]
    NoPeriods,
    #[error("market needs at least one value atom")]
    NoAtoms,
    #[error("atom {index} = {value} lies outside [0, 1]")]
    AtomOutOfRange { index: usize, value: String },
    #[error("atoms must be strictly increasing (atom {index} does not exceed its predecessor)")]
    AtomsNotIncreasing { index: usize },
    #[error("mass table has {found} rows for {expected} periods")]
    MassRows { expected: usize, found: usize },
    #[error("mass row for period {period} has {found} entries for {expected} atoms")]
    MassColumns {
        period: usize,
        expected: usize,
        found: usize,
    },
    #[error("negative mass {value} for period {period}, atom {atom}")]
    NegativeMass {
        period: usize,
        atom: usize,
        value: String,
    },
    #[error("inventory {0} is negative")]
    NegativeInventory(String),
    #[error("schedule `{schedule}` has {found} entries for {expected} periods")]
    ScheduleLength {
        schedule: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("schedule `{schedule}` entry {period} = {value} is outside (0, 1]")]
    DiscountOutOfRange {
        schedule: &'static str,
        period: usize,
        value: String,
    },
    #[error("schedule `{schedule}` increases at period {period}")]
    NonMonotoneDiscount {
        schedule: &'static str,
        period: usize,
    },
}

/// Every violation found in a market description.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct Violations(pub Vec<Violation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msgs: Vec<String> = self.0.iter().map(ToString::to_string).collect();
        write!(f, "invalid market: {}", msgs.join("; "))
    }
}

// comparisons that treat NaN as a violation
fn increasing<S: PartialOrd>(a: &S, b: &S) -> bool {
    a.partial_cmp(b) == Some(Ordering::Less)
}

fn nonnegative<S: Scalar>(x: &S) -> bool {
    matches!(
        x.partial_cmp(&S::zero()),
        Some(Ordering::Greater | Ordering::Equal)
    )
}

/// Checks every market invariant; returns the validated market or the full
/// list of violations.
pub fn validate_market<S: Scalar>(spec: MarketSpec<S>) -> Result<Market<S>, Violations> {
    let mut errs = Vec::new();
    let zero = S::zero();
    let one = S::one();
    let show = crate::scalar::render::<S>;

    if spec.periods == 0 {
        errs.push(Violation::NoPeriods);
    }
    if spec.atoms.is_empty() {
        errs.push(Violation::NoAtoms);
    }
    for (i, a) in spec.atoms.iter().enumerate() {
        if !(*a >= zero && *a <= one) {
            errs.push(Violation::AtomOutOfRange {
                index: i + 1,
                value: show(a),
            });
        }
        if i > 0 && !increasing(&spec.atoms[i - 1], a) {
            errs.push(Violation::AtomsNotIncreasing { index: i + 1 });
        }
    }
    if spec.mass.len() != spec.periods {
        errs.push(Violation::MassRows {
            expected: spec.periods,
            found: spec.mass.len(),
        });
    }
    for (t, row) in spec.mass.iter().enumerate() {
        if row.len() != spec.atoms.len() {
            errs.push(Violation::MassColumns {
                period: t + 1,
                expected: spec.atoms.len(),
                found: row.len(),
            });
        }
        for (i, m) in row.iter().enumerate() {
            if !nonnegative(m) {
                errs.push(Violation::NegativeMass {
                    period: t + 1,
                    atom: i + 1,
                    value: show(m),
                });
            }
        }
    }
    if let Inventory::Bounded(cap) = &spec.inventory {
        if !nonnegative(cap) {
            errs.push(Violation::NegativeInventory(show(cap)));
        }
    }
    let schedules = [
        ("delta", &spec.discounts.delta),
        ("lambdaS", &spec.discounts.lambda_s),
        ("lambdaB", &spec.discounts.lambda_b),
    ];
    for (name, values) in schedules {
        if values.len() != spec.periods {
            errs.push(Violation::ScheduleLength {
                schedule: name,
                expected: spec.periods,
                found: values.len(),
            });
        }
        for (t, d) in values.iter().enumerate() {
            if !(*d > zero && *d <= one) {
                errs.push(Violation::DiscountOutOfRange {
                    schedule: name,
                    period: t + 1,
                    value: show(d),
                });
            }
            if t > 0 && values[t - 1] < *d {
                errs.push(Violation::NonMonotoneDiscount {
                    schedule: name,
                    period: t + 1,
                });
            }
        }
    }

    if errs.is_empty() {
        Ok(Market { spec })
    } else {
        Err(Violations(errs))
    }
}

/// Errors from reading a market document.
#[derive(Debug, Error)]
pub enum MarketError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("parse error in field `{field}`: {message}")]
    Field { field: String, message: String },
    #[error(transparent)]
    Invalid(#[from] Violations),
}

/// A JSON number or a string holding a decimal or a fraction.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawNumber {
    Number(serde_json::Number),
    Text(String),
}

impl RawNumber {
    pub(crate) fn literal(&self, field: &str) -> Result<Literal, MarketError> {
        let text = match self {
            RawNumber::Number(n) => n.to_string(),
            RawNumber::Text(s) => s.clone(),
        };
        text.parse()
            .map_err(|e: crate::scalar::LiteralError| MarketError::Field {
                field: field.to_string(),
                message: e.to_string(),
            })
    }

    pub(crate) fn scalar<S: Scalar>(&self, field: &str) -> Result<S, MarketError> {
        self.literal(field).map(|lit| S::from_literal(&lit))
    }

    pub(crate) fn is_infinity(&self) -> bool {
        matches!(self, RawNumber::Text(s) if matches!(s.trim(), "inf" | "Infinity" | "infinity"))
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMarket {
    #[serde(rename = "T")]
    periods: usize,
    atoms: Vec<RawNumber>,
    mass: Vec<Vec<RawNumber>>,
    inventory: RawNumber,
    delta: Vec<RawNumber>,
    #[serde(rename = "lambdaS", default, skip_serializing_if = "Option::is_none")]
    lambda_s: Option<Vec<RawNumber>>,
    #[serde(rename = "lambdaB", default, skip_serializing_if = "Option::is_none")]
    lambda_b: Option<Vec<RawNumber>>,
}

fn scalars<S: Scalar>(raw: &[RawNumber], field: &str) -> Result<Vec<S>, MarketError> {
    raw.iter()
        .enumerate()
        .map(|(i, x)| x.scalar(&format!("{field}[{i}]")))
        .collect()
}

/// Parses a market-spec JSON document and validates it.
///
/// Numbers may be JSON numbers or strings holding decimals or fractions
/// (`"2/3"`). `lambdaS`/`lambdaB` default to all-ones; `inventory` may be
/// the string `"inf"`.
pub fn parse_market<S: Scalar>(text: &str) -> Result<Market<S>, MarketError> {
    let raw: RawMarket = serde_json::from_str(text).map_err(|e| MarketError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;

    let atoms: Vec<S> = scalars(&raw.atoms, "atoms")?;
    if let Some(i) = (1..atoms.len()).find(|&i| !increasing(&atoms[i - 1], &atoms[i])) {
        return Err(MarketError::Field {
            field: format!("atoms[{i}]"),
            message: "atoms must be distinct and listed in increasing order".into(),
        });
    }
    let mass = raw
        .mass
        .iter()
        .enumerate()
        .map(|(t, row)| scalars(row, &format!("mass[{t}]")))
        .collect::<Result<Vec<_>, _>>()?;
    let inventory = if raw.inventory.is_infinity() {
        Inventory::Unbounded
    } else {
        Inventory::Bounded(raw.inventory.scalar("inventory")?)
    };
    let ones = || vec![S::one(); raw.periods];
    let discounts = DiscountSchedule {
        delta: scalars(&raw.delta, "delta")?,
        lambda_s: match &raw.lambda_s {
            Some(v) => scalars(v, "lambdaS")?,
            None => ones(),
        },
        lambda_b: match &raw.lambda_b {
            Some(v) => scalars(v, "lambdaB")?,
            None => ones(),
        },
    };
    let spec = MarketSpec {
        periods: raw.periods,
        atoms,
        mass,
        inventory,
        discounts,
    };
    Ok(validate_market(spec)?)
}

pub(crate) fn raw<S: Scalar>(x: &S) -> RawNumber {
    match x.to_json() {
        Value::Number(n) => RawNumber::Number(n),
        Value::String(s) => RawNumber::Text(s),
        other => RawNumber::Text(other.to_string()),
    }
}

/// Renders a market as a market document that parses back to the same
/// market (bit-exactly for floats, exactly for rationals).
pub fn serialize_market<S: Scalar>(market: &Market<S>) -> String {
    let spec = market.spec();
    let raws = |xs: &[S]| xs.iter().map(raw).collect::<Vec<_>>();
    let doc = RawMarket {
        periods: spec.periods,
        atoms: raws(&spec.atoms),
        mass: spec.mass.iter().map(|row| raws(row)).collect(),
        inventory: match &spec.inventory {
            Inventory::Bounded(cap) => raw(cap),
            Inventory::Unbounded => RawNumber::Text("inf".into()),
        },
        delta: raws(&spec.discounts.delta),
        lambda_s: Some(raws(&spec.discounts.lambda_s)),
        lambda_b: Some(raws(&spec.discounts.lambda_b)),
    };
    serde_json::to_string_pretty(&doc).expect("market documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::Rational;

    fn q(n: i64, d: i64) -> Rational {
        Rational::ratio(n, d)
    }

    pub(crate) const EX_RATION: &str = r#"{
        "T": 2,
        "atoms": ["2/3", 1],
        "mass": [[0, 1], [1, 0]],
        "inventory": "3/2",
        "delta": [1, 1]
    }"#;

    #[test]
    fn ration_fixture_is_valid() {
        let m: Market<Rational> = parse_market(EX_RATION).unwrap();
        assert_eq!(m.periods(), 2);
        assert_eq!(m.atoms(), &[q(2, 3), q(1, 1)]);
        assert_eq!(m.inventory(), &Inventory::Bounded(q(3, 2)));
        assert!(m.discounts().is_base_model());
        assert_eq!(m.total_mass(), q(2, 1));
    }

    #[test]
    fn minimal_instance_with_unbounded_supply() {
        let spec = MarketSpec {
            periods: 1,
            atoms: vec![0.5],
            mass: vec![vec![0.0]],
            inventory: Inventory::Unbounded,
            discounts: DiscountSchedule::undiscounted(1),
        };
        assert!(validate_market(spec).is_ok());
    }

    #[test]
    fn increasing_delta_is_rejected() {
        let spec = MarketSpec {
            periods: 2,
            atoms: vec![q(1, 2)],
            mass: vec![vec![q(1, 1)], vec![q(1, 1)]],
            inventory: Inventory::Unbounded,
            discounts: DiscountSchedule::with_delta(vec![q(1, 2), q(9, 10)]),
        };
        let errs = validate_market(spec).unwrap_err();
        assert_eq!(
            errs.0,
            vec![Violation::NonMonotoneDiscount {
                schedule: "delta",
                period: 2
            }]
        );
    }

    #[test]
    fn violations_are_all_reported() {
        let spec = MarketSpec {
            periods: 1,
            atoms: vec![1.5],
            mass: vec![vec![-1.0]],
            inventory: Inventory::Bounded(-2.0),
            discounts: DiscountSchedule::with_delta(vec![0.0]),
        };
        let errs = validate_market(spec).unwrap_err().0;
        assert!(errs
            .iter()
            .any(|e| matches!(e, Violation::AtomOutOfRange { .. })));
        assert!(errs
            .iter()
            .any(|e| matches!(e, Violation::NegativeMass { .. })));
        assert!(errs
            .iter()
            .any(|e| matches!(e, Violation::NegativeInventory(_))));
        assert!(errs
            .iter()
            .any(|e| matches!(e, Violation::DiscountOutOfRange { .. })));
    }

    #[test]
    fn money_discounts_default_to_one() {
        let m: Market<f64> = parse_market(EX_RATION).unwrap();
        assert_eq!(m.discounts().lambda_s, vec![1.0, 1.0]);
        assert_eq!(m.discounts().lambda_b, vec![1.0, 1.0]);
    }

    #[test]
    fn duplicate_atoms_are_a_parse_error() {
        let doc = r#"{"T":1,"atoms":[0.5,0.5],"mass":[[1,1]],"inventory":"inf","delta":[1]}"#;
        let err = parse_market::<f64>(doc).unwrap_err();
        assert!(matches!(err, MarketError::Field { ref field, .. } if field == "atoms[1]"));
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse_market::<f64>("{\n  \"T\": 1,\n  oops\n}").unwrap_err();
        match err {
            MarketError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let err = parse_market::<f64>(
            r#"{"T":1,"atoms":["x"],"mass":[[1]],"inventory":"inf","delta":[1]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, MarketError::Field { ref field, .. } if field == "atoms[0]"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let doc = r#"{"T":1,"atoms":[1],"mass":[[1]],"inventory":"inf","delta":[1],"extra":0}"#;
        assert!(matches!(
            parse_market::<f64>(doc),
            Err(MarketError::Syntax { .. })
        ));
    }

    #[test]
    fn serialize_round_trip_rational() {
        let m: Market<Rational> = parse_market(EX_RATION).unwrap();
        let text = serialize_market(&m);
        let back: Market<Rational> = parse_market(&text).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn decimal_input_stays_exact() {
        let doc = r#"{"T":1,"atoms":[0.1, 0.3],"mass":[[0.2, 0.7]],"inventory":0.1,"delta":[0.9]}"#;
        let m: Market<Rational> = parse_market(doc).unwrap();
        assert_eq!(m.atoms()[0], q(1, 10));
        assert_eq!(m.mass(0, 1), &q(7, 10));
        assert_eq!(m.inventory(), &Inventory::Bounded(q(1, 10)));
    }
}
