#![allow(dead_code)]

use proptest::collection::{btree_set, vec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use rationing::evaluator::AllocationProfile;
use rationing::market::{validate_market, DiscountSchedule, Inventory, Market, MarketSpec};
use rationing::optimizer::random_profile;
use rationing::scalar::{Rational, Scalar};

pub fn q(n: i64, d: i64) -> Rational {
    Rational::ratio(n, d)
}

pub fn fixture(name: &str) -> Market<Rational> {
    let path = format!("{}/../../fixtures/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).expect("fixture file");
    rationing::market::parse_market(&text).expect("valid fixture")
}

/// Non-increasing schedule of quarters in (0, 1].
fn schedule(periods: usize) -> impl Strategy<Value = Vec<Rational>> {
    vec(1i64..=4, periods).prop_map(|mut xs| {
        xs.sort_unstable_by(|a, b| b.cmp(a));
        xs.into_iter().map(|x| q(x, 4)).collect()
    })
}

#[derive(Debug, Clone, Copy)]
pub struct Shape {
    pub max_periods: usize,
    pub max_atoms: usize,
    pub bounded: bool,
    pub money_discounts: bool,
}

impl Shape {
    pub const SMALL: Shape = Shape {
        max_periods: 3,
        max_atoms: 3,
        bounded: true,
        money_discounts: false,
    };
}

/// Markets with atoms on the twelfths, masses in quarters and discounts in
/// quarters.
pub fn arb_market(shape: Shape) -> impl Strategy<Value = Market<Rational>> {
    (1..=shape.max_periods, 1..=shape.max_atoms).prop_flat_map(move |(periods, atoms)| {
        let inventory = if shape.bounded {
            prop_oneof![Just(None), (1i64..=8).prop_map(Some)].boxed()
        } else {
            Just(None).boxed()
        };
        let lambdas = if shape.money_discounts {
            (schedule(periods), schedule(periods))
                .prop_map(Some)
                .boxed()
        } else {
            Just(None).boxed()
        };
        (
            btree_set(1i64..=12, atoms),
            vec(vec(0i64..=4, atoms), periods),
            schedule(periods),
            lambdas,
            inventory,
        )
            .prop_map(move |(atoms, mass, delta, lambdas, inventory)| {
                let (lambda_s, lambda_b) =
                    lambdas.unwrap_or_else(|| (vec![q(1, 1); periods], vec![q(1, 1); periods]));
                validate_market(MarketSpec {
                    periods,
                    atoms: atoms.into_iter().map(|k| q(k, 12)).collect(),
                    mass: mass
                        .into_iter()
                        .map(|row| row.into_iter().map(|x| q(x, 4)).collect())
                        .collect(),
                    inventory: inventory
                        .map_or(Inventory::Unbounded, |k| Inventory::Bounded(q(k, 4))),
                    discounts: DiscountSchedule {
                        delta,
                        lambda_s,
                        lambda_b,
                    },
                })
                .expect("generated markets are valid")
            })
    })
}

/// A market with one of the random monotone profiles the optimizer uses as
/// starting points.
pub fn arb_instance(
    shape: Shape,
) -> impl Strategy<Value = (Market<Rational>, AllocationProfile<Rational>)> {
    (arb_market(shape), any::<u64>()).prop_map(|(m, seed)| {
        let a = random_profile(&m, &mut ChaCha8Rng::seed_from_u64(seed));
        (m, a)
    })
}

pub fn rational_to_f64(x: &Rational) -> f64 {
    x.to_f64()
}
