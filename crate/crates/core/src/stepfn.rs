//! Monotone step functions on [0, 1], common refinements, exact Lebesgue
//! integration of piecewise-constant expressions, and continuous piecewise
//! linear curves.

use std::cmp::Ordering;

use thiserror::Error;

use crate::scalar::{render, Scalar};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StepError {
    #[error("value {0} lies outside [0, 1]")]
    Domain(String),
    #[error("level {0} lies outside [0, 1]")]
    LevelOutOfRange(String),
    #[error("levels must be non-decreasing")]
    LevelsDecreasing,
    #[error("jumps must be strictly ordered by (location, closed before open)")]
    JumpsUnordered,
    #[error("expected {expected} levels for {jumps} jumps, found {found}")]
    LevelCount {
        jumps: usize,
        expected: usize,
        found: usize,
    },
    #[error("integrand refers to function {0}, which was not supplied")]
    UnknownFunction(usize),
}

fn check_unit<S: Scalar>(v: &S) -> Result<(), StepError> {
    if *v >= S::zero() && *v <= S::one() {
        Ok(())
    } else {
        Err(StepError::Domain(render(v)))
    }
}

/// Whether the point at a jump location already takes the new level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Inclusion {
    /// `v = at` takes the new level.
    Closed,
    /// `v = at` keeps the old level.
    Open,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Jump<S> {
    pub at: S,
    pub inclusion: Inclusion,
}

impl<S: Scalar> Jump<S> {
    pub fn closed(at: S) -> Self {
        Jump {
            at,
            inclusion: Inclusion::Closed,
        }
    }

    pub fn open(at: S) -> Self {
        Jump {
            at,
            inclusion: Inclusion::Open,
        }
    }

    /// Order along the axis: by location, a closed jump before an open one
    /// at the same point.
    pub fn key_cmp(&self, other: &Self) -> Ordering {
        self.at
            .total_cmp(&other.at)
            .then(self.inclusion.cmp(&other.inclusion))
    }

    /// Whether `v` lies on or past this jump.
    pub fn covers(&self, v: &S) -> bool {
        match self.inclusion {
            Inclusion::Closed => *v >= self.at,
            Inclusion::Open => *v > self.at,
        }
    }
}

/// Non-decreasing piecewise-constant function from [0, 1] into [0, 1].
///
/// `levels[k]` holds on the piece after the first `k` jumps. Representation
/// is canonical: no zero-height jumps, no closed jump at 0 (absorbed into the
/// first level), no open jump at 1 (it would affect nothing in the domain).
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction<S> {
    jumps: Vec<Jump<S>>,
    levels: Vec<S>,
}

impl<S: Scalar> StepFunction<S> {
    pub fn zero() -> Self {
        StepFunction {
            jumps: Vec::new(),
            levels: vec![S::zero()],
        }
    }

    pub fn one() -> Self {
        StepFunction {
            jumps: Vec::new(),
            levels: vec![S::one()],
        }
    }

    pub fn constant(level: S) -> Result<Self, StepError> {
        Self::from_parts(Vec::new(), vec![level])
    }

    /// `1` on and past `jump`, `0` before it.
    pub fn indicator(jump: Jump<S>) -> Self {
        Self::scaled(jump, S::one()).expect("indicator of a unit-interval jump")
    }

    /// `level` on and past `jump`, `0` before it.
    pub fn scaled(jump: Jump<S>, level: S) -> Result<Self, StepError> {
        Self::from_parts(vec![jump], vec![S::zero(), level])
    }

    /// Builds a function from explicit jumps and levels, checking every
    /// invariant, then canonicalizes.
    pub fn from_parts(jumps: Vec<Jump<S>>, levels: Vec<S>) -> Result<Self, StepError> {
        if levels.len() != jumps.len() + 1 {
            return Err(StepError::LevelCount {
                jumps: jumps.len(),
                expected: jumps.len() + 1,
                found: levels.len(),
            });
        }
        for j in &jumps {
            check_unit(&j.at)?;
        }
        if jumps
            .windows(2)
            .any(|w| w[0].key_cmp(&w[1]) != Ordering::Less)
        {
            return Err(StepError::JumpsUnordered);
        }
        for l in &levels {
            if !(*l >= S::zero() && *l <= S::one()) {
                return Err(StepError::LevelOutOfRange(render(l)));
            }
        }
        if levels.windows(2).any(|w| w[1] < w[0]) {
            return Err(StepError::LevelsDecreasing);
        }
        Ok(Self::canonical(jumps, levels))
    }

    fn canonical(jumps: Vec<Jump<S>>, levels: Vec<S>) -> Self {
        let mut levels_iter = levels.into_iter();
        let mut out_levels = vec![levels_iter.next().expect("at least one level")];
        let mut out_jumps: Vec<Jump<S>> = Vec::new();
        for (jump, level) in jumps.into_iter().zip(levels_iter) {
            if level != *out_levels.last().unwrap() {
                out_jumps.push(jump);
                out_levels.push(level);
            }
        }
        while out_jumps
            .first()
            .is_some_and(|j| j.inclusion == Inclusion::Closed && j.at.is_zero())
        {
            out_jumps.remove(0);
            out_levels.remove(0);
        }
        while out_jumps
            .last()
            .is_some_and(|j| j.inclusion == Inclusion::Open && j.at.is_one())
        {
            out_jumps.pop();
            out_levels.pop();
        }
        StepFunction {
            jumps: out_jumps,
            levels: out_levels,
        }
    }

    pub fn jumps(&self) -> &[Jump<S>] {
        &self.jumps
    }

    pub fn levels(&self) -> &[S] {
        &self.levels
    }

    /// Level on the last piece, i.e. the value at 1.
    pub fn top_level(&self) -> &S {
        self.levels.last().unwrap()
    }

    pub fn is_zero(&self) -> bool {
        self.jumps.is_empty() && self.levels[0].is_zero()
    }

    /// Number of rises from 0, counting a positive level at 0 as a rise.
    pub fn step_count(&self) -> usize {
        self.jumps.len() + usize::from(!self.levels[0].is_zero())
    }

    /// The rises as `(jump, level after it)`; a positive starting level is
    /// reported as a closed jump at 0.
    pub fn rises(&self) -> Vec<(Jump<S>, S)> {
        let mut out = Vec::with_capacity(self.jumps.len() + 1);
        if !self.levels[0].is_zero() {
            out.push((Jump::closed(S::zero()), self.levels[0].clone()));
        }
        for (j, l) in self.jumps.iter().zip(&self.levels[1..]) {
            out.push((j.clone(), l.clone()));
        }
        out
    }

    /// Value at `v`, which must lie in [0, 1].
    pub fn eval(&self, v: &S) -> Result<S, StepError> {
        check_unit(v)?;
        Ok(self.level_at(v).clone())
    }

    /// Value at `v` without the domain check.
    pub fn level_at(&self, v: &S) -> &S {
        let k = self.jumps.iter().take_while(|j| j.covers(v)).count();
        &self.levels[k]
    }

    /// Limit from the right at `v`.
    pub fn level_right_of(&self, v: &S) -> &S {
        let k = self.jumps.iter().take_while(|j| j.at <= *v).count();
        &self.levels[k]
    }

    /// Limit from the left at `v`.
    pub fn level_left_of(&self, v: &S) -> &S {
        let k = self.jumps.iter().take_while(|j| j.at < *v).count();
        &self.levels[k]
    }

    /// `∫_lo^hi f(u) du` with the bounds clamped to [0, 1].
    pub fn integral(&self, lo: &S, hi: &S) -> S {
        let lo = lo.clone().max_of(S::zero());
        let hi = hi.clone().min_of(S::one());
        let mut total = S::zero();
        if hi <= lo {
            return total;
        }
        let mut start = S::zero();
        for (k, level) in self.levels.iter().enumerate() {
            let end = self.jumps.get(k).map_or_else(S::one, |j| j.at.clone());
            let a = start.clone().max_of(lo.clone());
            let b = end.clone().min_of(hi.clone());
            if a < b && !level.is_zero() {
                total = total + level.clone() * (b - a);
            }
            start = end;
        }
        total
    }

    /// Pointwise combination. `op` receives the values of every input at a
    /// common point and must preserve monotonicity (non-negative mixtures and
    /// maxima do).
    pub fn pointwise(fs: &[&StepFunction<S>], op: impl Fn(&[S]) -> S) -> Self {
        let mut keys: Vec<&Jump<S>> = fs.iter().flat_map(|f| f.jumps.iter()).collect();
        keys.sort_by(|a, b| a.key_cmp(b));
        keys.dedup_by(|a, b| a.key_cmp(b) == Ordering::Equal);

        let values_at = |pick: &dyn Fn(&StepFunction<S>) -> S| -> S {
            let vals: Vec<S> = fs.iter().map(|f| pick(f)).collect();
            op(&vals)
        };
        let mut levels = vec![values_at(&|f| f.levels[0].clone())];
        let mut jumps = Vec::with_capacity(keys.len());
        for key in keys {
            let level = match key.inclusion {
                Inclusion::Closed => values_at(&|f| f.level_at(&key.at).clone()),
                Inclusion::Open => values_at(&|f| f.level_right_of(&key.at).clone()),
            };
            jumps.push(key.clone());
            levels.push(level);
        }
        debug_assert!(levels.windows(2).all(|w| w[0] <= w[1]));
        Self::canonical(jumps, levels)
    }

    /// `(1 − θ)·self + θ·other` for θ in [0, 1].
    pub fn mix(&self, other: &Self, theta: &S) -> Self {
        let keep = S::one() - theta.clone();
        Self::pointwise(&[self, other], |v| {
            keep.clone() * v[0].clone() + theta.clone() * v[1].clone()
        })
    }

    pub fn max(&self, other: &Self) -> Self {
        Self::pointwise(&[self, other], |v| v[0].clone().max_of(v[1].clone()))
    }

    /// Converts to another backend.
    pub fn convert<T: Scalar>(&self, conv: impl Fn(&S) -> T) -> StepFunction<T> {
        let jumps = self
            .jumps
            .iter()
            .map(|j| Jump {
                at: conv(&j.at),
                inclusion: j.inclusion,
            })
            .collect();
        StepFunction::canonical(jumps, self.levels.iter().map(conv).collect())
    }
}

/// Ordered breakpoints `0 = p_0 < p_1 < … < p_m = 1`; segment `j` is the open
/// interval `(p_j, p_{j+1})`.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition<S> {
    points: Vec<S>,
}

impl<S: Scalar> Partition<S> {
    pub fn points(&self) -> &[S] {
        &self.points
    }

    pub fn segment_count(&self) -> usize {
        self.points.len() - 1
    }

    pub fn segment(&self, j: usize) -> (&S, &S) {
        (&self.points[j], &self.points[j + 1])
    }

    pub fn segment_length(&self, j: usize) -> S {
        self.points[j + 1].clone() - self.points[j].clone()
    }

    /// Index of `v` among the breakpoints, if it is one.
    pub fn index_of(&self, v: &S) -> Option<usize> {
        self.points.binary_search_by(|p| p.total_cmp(v)).ok()
    }
}

/// Coarsest partition on whose open segments every input is constant, with
/// `extra` points (typically market atoms) merged in. Points outside [0, 1]
/// are ignored.
pub fn segment_refinement<S: Scalar>(fs: &[&StepFunction<S>], extra: &[S]) -> Partition<S> {
    let mut points: Vec<S> = vec![S::zero(), S::one()];
    points.extend(fs.iter().flat_map(|f| f.jumps.iter().map(|j| j.at.clone())));
    points.extend(
        extra
            .iter()
            .filter(|p| **p >= S::zero() && **p <= S::one())
            .cloned(),
    );
    points.sort_by(|a, b| a.total_cmp(b));
    points.dedup();
    Partition { points }
}

/// Expression over step functions, referenced by position in the slice
/// passed to [`lebesgue_integral`].
#[derive(Debug, Clone, PartialEq)]
pub enum Integrand<S> {
    Const(S),
    Func(usize),
    Sum(Vec<Integrand<S>>),
    Product(Vec<Integrand<S>>),
    /// `1 − e`.
    Complement(Box<Integrand<S>>),
    Scaled(S, Box<Integrand<S>>),
}

impl<S: Scalar> Integrand<S> {
    fn value(&self, levels: &[S]) -> S {
        match self {
            Integrand::Const(c) => c.clone(),
            Integrand::Func(k) => levels[*k].clone(),
            Integrand::Sum(terms) => terms.iter().fold(S::zero(), |acc, e| acc + e.value(levels)),
            Integrand::Product(terms) => {
                terms.iter().fold(S::one(), |acc, e| acc * e.value(levels))
            }
            Integrand::Complement(e) => S::one() - e.value(levels),
            Integrand::Scaled(w, e) => w.clone() * e.value(levels),
        }
    }

    fn max_func(&self) -> Option<usize> {
        match self {
            Integrand::Const(_) => None,
            Integrand::Func(k) => Some(*k),
            Integrand::Sum(terms) | Integrand::Product(terms) => {
                terms.iter().filter_map(Integrand::max_func).max()
            }
            Integrand::Complement(e) | Integrand::Scaled(_, e) => e.max_func(),
        }
    }
}

/// Exact `∫_0^upper e(u) du` for a piecewise-constant integrand: a finite
/// sum of segment length times the integrand's value on the segment. Jump
/// inclusion flags play no role.
pub fn lebesgue_integral<S: Scalar>(
    expr: &Integrand<S>,
    fs: &[StepFunction<S>],
    upper: &S,
) -> Result<S, StepError> {
    check_unit(upper)?;
    if let Some(k) = expr.max_func() {
        if k >= fs.len() {
            return Err(StepError::UnknownFunction(k));
        }
    }
    let refs: Vec<&StepFunction<S>> = fs.iter().collect();
    let part = segment_refinement(&refs, &[]);
    let mut total = S::zero();
    for j in 0..part.segment_count() {
        let (lo, hi) = part.segment(j);
        if *lo >= *upper {
            break;
        }
        let end = hi.clone().min_of(upper.clone());
        let levels: Vec<S> = fs.iter().map(|f| f.level_right_of(lo).clone()).collect();
        total = total + expr.value(&levels) * (end - lo.clone());
    }
    Ok(total)
}

/// Continuous piecewise-linear function on [0, 1], stored as knots, values
/// at the knots and the slope on each piece.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseLinear<S> {
    knots: Vec<S>,
    values: Vec<S>,
    slopes: Vec<S>,
}

impl<S: Scalar> PiecewiseLinear<S> {
    pub fn zero() -> Self {
        PiecewiseLinear {
            knots: vec![S::zero(), S::one()],
            values: vec![S::zero(), S::zero()],
            slopes: vec![S::zero()],
        }
    }

    /// Integrates `slopes` from `start` at the first knot. `knots` must be
    /// strictly increasing from 0 to 1 with one slope per piece.
    pub fn from_slopes(knots: Vec<S>, start: S, slopes: Vec<S>) -> Self {
        assert_eq!(knots.len(), slopes.len() + 1, "one slope per piece");
        let mut values = Vec::with_capacity(knots.len());
        values.push(start);
        for (j, s) in slopes.iter().enumerate() {
            let len = knots[j + 1].clone() - knots[j].clone();
            let next = values[j].clone() + s.clone() * len;
            values.push(next);
        }
        PiecewiseLinear {
            knots,
            values,
            slopes,
        }
    }

    pub fn knots(&self) -> &[S] {
        &self.knots
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn slopes(&self) -> &[S] {
        &self.slopes
    }

    fn piece_of(&self, v: &S) -> usize {
        let k = self.knots[1..].iter().take_while(|b| **b < *v).count();
        k.min(self.slopes.len() - 1)
    }

    pub fn eval(&self, v: &S) -> Result<S, StepError> {
        check_unit(v)?;
        Ok(self.value_at(v))
    }

    /// Value at `v` without the domain check.
    pub fn value_at(&self, v: &S) -> S {
        let j = self.piece_of(v);
        self.values[j].clone() + self.slopes[j].clone() * (v.clone() - self.knots[j].clone())
    }

    /// Slope of the piece immediately right of `v` (the last piece at 1).
    pub fn slope_right_of(&self, v: &S) -> &S {
        let k = self.knots[1..].iter().take_while(|b| **b <= *v).count();
        &self.slopes[k.min(self.slopes.len() - 1)]
    }

    /// Slope of the piece immediately left of `v` (the first piece at 0).
    pub fn slope_left_of(&self, v: &S) -> &S {
        &self.slopes[self.piece_of(v)]
    }

    /// Slopes are non-decreasing up to `tol`.
    pub fn is_convex(&self, tol: f64) -> bool {
        self.slopes
            .windows(2)
            .all(|w| w[0] <= w[1] || w[0].approx_eq(&w[1], tol))
    }

    pub fn max_slope(&self) -> &S {
        self.slopes
            .iter()
            .max_by(|a, b| a.total_cmp(b))
            .expect("at least one piece")
    }

    /// `self − other` on the union of both knot sets.
    pub fn minus(&self, other: &Self) -> Self {
        let mut knots: Vec<S> = self.knots.iter().chain(&other.knots).cloned().collect();
        knots.sort_by(|a, b| a.total_cmp(b));
        knots.dedup();
        let slopes = knots
            .windows(2)
            .map(|w| self.slope_right_of(&w[0]).clone() - other.slope_right_of(&w[0]).clone())
            .collect();
        let start = self.values[0].clone() - other.values[0].clone();
        Self::from_slopes(knots, start, slopes)
    }
}
