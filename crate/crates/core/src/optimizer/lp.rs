//! The single-period subproblem. With every other period fixed, revenue and
//! inventory are affine in the allocation rule of period `t`; the
//! coefficients are recovered by probing the evaluator and the maximizer is
//! found among the basic solutions, which have at most two steps.

use std::cmp::Ordering;

use thiserror::Error;

use crate::evaluator::{revenue_and_inventory, AllocationProfile, EvalError};
use crate::market::Market;
use crate::scalar::{render, Scalar};
use crate::stepfn::{Jump, Partition, StepFunction};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LpError {
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("period {period} is out of range for a {periods}-period market")]
    PeriodOutOfRange { period: usize, periods: usize },
    #[error(
        "coordinate functional is not affine ({probe}: predicted {predicted}, evaluated {actual})"
    )]
    AffinityViolation {
        probe: String,
        predicted: String,
        actual: String,
    },
}

/// Affine model of revenue and inventory in one period's allocation rule:
/// `F(h) = base + Σ_j density_j ∫_{seg j} h + Σ_k point_k h(p_k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateLP<S> {
    partition: Partition<S>,
    is_atom: Vec<bool>,
    obj_density: Vec<S>,
    obj_point: Vec<S>,
    inv_density: Vec<S>,
    inv_point: Vec<S>,
    obj_base: S,
    inv_base: S,
    budget: Option<S>,
}

impl<S: Scalar> CoordinateLP<S> {
    /// Assembles a subproblem from explicit coefficients. Point coefficients
    /// are indexed like `partition.points()`; only atoms may carry nonzero
    /// point coefficients.
    #[allow(clippy::too_many_arguments)]
    pub fn from_coefficients(
        partition: Partition<S>,
        is_atom: Vec<bool>,
        obj_density: Vec<S>,
        obj_point: Vec<S>,
        inv_density: Vec<S>,
        inv_point: Vec<S>,
        budget: Option<S>,
    ) -> Self {
        let points = partition.points().len();
        assert_eq!(is_atom.len(), points);
        assert_eq!(obj_point.len(), points);
        assert_eq!(inv_point.len(), points);
        assert_eq!(obj_density.len(), points - 1);
        assert_eq!(inv_density.len(), points - 1);
        CoordinateLP {
            partition,
            is_atom,
            obj_density,
            obj_point,
            inv_density,
            inv_point,
            obj_base: S::zero(),
            inv_base: S::zero(),
            budget: budget.map(|b| b.max_of(S::zero())),
        }
    }

    pub fn partition(&self) -> &Partition<S> {
        &self.partition
    }

    pub fn is_atom(&self) -> &[bool] {
        &self.is_atom
    }

    pub fn obj_density(&self) -> &[S] {
        &self.obj_density
    }

    pub fn obj_point(&self) -> &[S] {
        &self.obj_point
    }

    pub fn inv_density(&self) -> &[S] {
        &self.inv_density
    }

    pub fn inv_point(&self) -> &[S] {
        &self.inv_point
    }

    /// Revenue and inventory with this period closed.
    pub fn base(&self) -> (&S, &S) {
        (&self.obj_base, &self.inv_base)
    }

    /// Inventory this period may add on top of the closed-period usage;
    /// `None` when supply is unlimited.
    pub fn budget(&self) -> Option<&S> {
        self.budget.as_ref()
    }

    /// Atom coefficient of the objective at value `v`, if `v` is an atom.
    pub fn obj_atom(&self, v: &S) -> Option<&S> {
        let k = self.partition.index_of(v)?;
        self.is_atom[k].then(|| &self.obj_point[k])
    }

    fn apply(&self, h: &StepFunction<S>, density: &[S], point: &[S]) -> S {
        let pts = self.partition.points();
        let mut total = S::zero();
        for (j, d) in density.iter().enumerate() {
            if !d.is_zero() {
                total = total + d.clone() * h.integral(&pts[j], &pts[j + 1]);
            }
        }
        for (p, c) in pts.iter().zip(point) {
            if !c.is_zero() {
                total = total + c.clone() * h.level_at(p).clone();
            }
        }
        total
    }

    /// Revenue predicted for rule `h`.
    pub fn objective(&self, h: &StepFunction<S>) -> S {
        self.obj_base.clone() + self.apply(h, &self.obj_density, &self.obj_point)
    }

    /// Inventory predicted for rule `h`.
    pub fn inventory(&self, h: &StepFunction<S>) -> S {
        self.inv_base.clone() + self.apply(h, &self.inv_density, &self.inv_point)
    }
}

/// Recovers the affine model of period `t` by evaluating the market with
/// period `t` set to 0 and to the closed and open indicators at every
/// breakpoint, then checks the model against two further probes.
pub fn build_coordinate_lp<S: Scalar>(
    m: &Market<S>,
    a: &AllocationProfile<S>,
    t: usize,
    tol: f64,
) -> Result<CoordinateLP<S>, LpError> {
    if a.periods() != m.periods() {
        return Err(EvalError::ProfileLength {
            expected: m.periods(),
            found: a.periods(),
        }
        .into());
    }
    if t >= m.periods() {
        return Err(LpError::PeriodOutOfRange {
            period: t,
            periods: m.periods(),
        });
    }
    let others: Vec<&StepFunction<S>> = a
        .rules()
        .iter()
        .enumerate()
        .filter(|(k, _)| *k != t)
        .map(|(_, r)| r)
        .collect();
    let partition = crate::stepfn::segment_refinement(&others, m.atoms());
    let pts = partition.points().to_vec();
    let is_atom: Vec<bool> = pts
        .iter()
        .map(|p| m.atoms().iter().any(|x| x == p))
        .collect();

    let probe = |h: StepFunction<S>| revenue_and_inventory(m, &a.with_rule(t, h));
    let (obj_base, inv_base) = probe(StepFunction::zero())?;

    let mut closed = Vec::with_capacity(pts.len());
    let mut open = Vec::with_capacity(pts.len());
    for p in &pts {
        closed.push(probe(StepFunction::indicator(Jump::closed(p.clone())))?);
        open.push(if p.is_one() {
            (obj_base.clone(), inv_base.clone())
        } else {
            probe(StepFunction::indicator(Jump::open(p.clone())))?
        });
    }

    let mut obj_point = Vec::with_capacity(pts.len());
    let mut inv_point = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        let dobj = closed[k].0.clone() - open[k].0.clone();
        let dinv = closed[k].1.clone() - open[k].1.clone();
        if is_atom[k] {
            obj_point.push(dobj);
            inv_point.push(dinv);
        } else {
            for (what, d) in [("revenue", &dobj), ("inventory", &dinv)] {
                if !d.approx_eq(&S::zero(), tol) {
                    return Err(LpError::AffinityViolation {
                        probe: format!("{what} point mass at non-atom {}", render(&pts[k])),
                        predicted: "0".into(),
                        actual: render(d),
                    });
                }
            }
            obj_point.push(S::zero());
            inv_point.push(S::zero());
        }
    }
    let mut obj_density = Vec::with_capacity(pts.len() - 1);
    let mut inv_density = Vec::with_capacity(pts.len() - 1);
    for j in 0..pts.len() - 1 {
        let len = partition.segment_length(j);
        obj_density.push((open[j].0.clone() - closed[j + 1].0.clone()) / len.clone());
        inv_density.push((open[j].1.clone() - closed[j + 1].1.clone()) / len);
    }

    let budget = m
        .inventory()
        .bound()
        .map(|cap| (cap.clone() - inv_base.clone()).max_of(S::zero()));
    let lp = CoordinateLP {
        partition,
        is_atom,
        obj_density,
        obj_point,
        inv_density,
        inv_point,
        obj_base,
        inv_base,
        budget,
    };

    let checks = [
        ("current rule", a.rule(t).clone()),
        (
            "constant 1/2",
            StepFunction::constant(S::half()).expect("1/2 is a level"),
        ),
    ];
    for (name, h) in checks {
        let (obj, inv) = probe(h.clone())?;
        for (what, predicted, actual) in [
            ("revenue", lp.objective(&h), obj),
            ("inventory", lp.inventory(&h), inv),
        ] {
            let scale = 1.0 + actual.to_f64().abs();
            if !predicted.approx_eq(&actual, tol * scale) {
                return Err(LpError::AffinityViolation {
                    probe: format!("{what} at {name}"),
                    predicted: render(&predicted),
                    actual: render(&actual),
                });
            }
        }
    }
    Ok(lp)
}

/// A basic solution: one or two indicators with weights.
struct Candidate<S> {
    terms: Vec<(usize, S)>,
    obj: S,
    inv: S,
}

/// Exact maximizer over monotone rules `h: [0,1] → [0,1]` subject to the
/// inventory budget.
///
/// Every such `h` is a mixture of indicators at breakpoints, so the problem
/// is a linear program with two constraints (total weight ≤ 1, inventory ≤
/// budget) and its vertices have at most two nonzero weights. All vertices
/// are enumerated: the zero rule, full single steps, single steps scaled to
/// exhaust the budget, and pairs of steps whose weights sum to one with the
/// budget exhausted. Ties (within `tol`) go to fewer steps, then lower
/// inventory, then earlier jumps.
pub fn solve_coordinate<S: Scalar>(lp: &CoordinateLP<S>, tol: f64) -> StepFunction<S> {
    let pts = lp.partition.points();
    let n = pts.len();

    // suffix sums: value of the closed indicator at point k
    let mut obj_closed = vec![S::zero(); n];
    let mut inv_closed = vec![S::zero(); n];
    let mut acc_obj = S::zero();
    let mut acc_inv = S::zero();
    for k in (0..n).rev() {
        if k + 1 < n {
            let len = lp.partition.segment_length(k);
            acc_obj = acc_obj + lp.obj_density[k].clone() * len.clone();
            acc_inv = acc_inv + lp.inv_density[k].clone() * len;
        }
        acc_obj = acc_obj + lp.obj_point[k].clone();
        acc_inv = acc_inv + lp.inv_point[k].clone();
        obj_closed[k] = acc_obj.clone();
        inv_closed[k] = acc_inv.clone();
    }

    // indicator keys in axis order with their (objective, inventory) gains
    let mut keys: Vec<(Jump<S>, S, S)> = Vec::with_capacity(2 * n);
    for k in 0..n {
        keys.push((
            Jump::closed(pts[k].clone()),
            obj_closed[k].clone(),
            inv_closed[k].clone(),
        ));
        if lp.is_atom[k] && !pts[k].is_one() {
            keys.push((
                Jump::open(pts[k].clone()),
                obj_closed[k].clone() - lp.obj_point[k].clone(),
                inv_closed[k].clone() - lp.inv_point[k].clone(),
            ));
        }
    }

    let mut cands: Vec<Candidate<S>> = vec![Candidate {
        terms: Vec::new(),
        obj: S::zero(),
        inv: S::zero(),
    }];
    for (k, (_, c, g)) in keys.iter().enumerate() {
        match &lp.budget {
            Some(b) if g > b => {
                let alpha = b.clone() / g.clone();
                if is_weight(&alpha) {
                    cands.push(Candidate {
                        terms: vec![(k, alpha.clone())],
                        obj: alpha * c.clone(),
                        inv: b.clone(),
                    });
                }
            }
            _ => cands.push(Candidate {
                terms: vec![(k, S::one())],
                obj: c.clone(),
                inv: g.clone(),
            }),
        }
    }
    if let Some(b) = &lp.budget {
        for k in 0..keys.len() {
            for l in k + 1..keys.len() {
                let (gk, gl) = (&keys[k].2, &keys[l].2);
                if gk == gl {
                    continue;
                }
                let alpha = (b.clone() - gl.clone()) / (gk.clone() - gl.clone());
                let beta = S::one() - alpha.clone();
                if !(is_weight(&alpha) && is_weight(&beta)) {
                    continue;
                }
                let obj = alpha.clone() * keys[k].1.clone() + beta.clone() * keys[l].1.clone();
                cands.push(Candidate {
                    terms: vec![(k, alpha), (l, beta)],
                    obj,
                    inv: b.clone(),
                });
            }
        }
    }

    let better = |x: &Candidate<S>, y: &Candidate<S>| -> bool {
        if !x.obj.approx_eq(&y.obj, tol) {
            return x.obj > y.obj;
        }
        if x.terms.len() != y.terms.len() {
            return x.terms.len() < y.terms.len();
        }
        if !x.inv.approx_eq(&y.inv, tol) {
            return x.inv < y.inv;
        }
        let xk: Vec<usize> = x.terms.iter().map(|t| t.0).collect();
        let yk: Vec<usize> = y.terms.iter().map(|t| t.0).collect();
        xk.cmp(&yk) == Ordering::Less
    };
    let mut best = 0;
    for i in 1..cands.len() {
        if better(&cands[i], &cands[best]) {
            best = i;
        }
    }

    let winner = &cands[best];
    match winner.terms.as_slice() {
        [] => StepFunction::zero(),
        [(k, alpha)] => {
            StepFunction::scaled(keys[*k].0.clone(), alpha.clone()).expect("weights lie in (0, 1]")
        }
        [(k, alpha), (l, _)] => StepFunction::from_parts(
            vec![keys[*k].0.clone(), keys[*l].0.clone()],
            vec![S::zero(), alpha.clone(), S::one()],
        )
        .expect("two ordered steps ending at 1"),
        _ => unreachable!("basic solutions have at most two terms"),
    }
}

/// In (0, 1].
fn is_weight<S: Scalar>(x: &S) -> bool {
    *x > S::zero() && *x <= S::one()
}
