//! Set-function machinery: marginal gains, lazy greedy insertion and deletion
//! driven by a max-heap of cached upper bounds, the alternating local search,
//! and plain (non-lazy) reference versions of each.
//!
//! Every algorithm here accesses the objective only through
//! [`SetFunction::eval`], so evaluation counts are exact and auditable. The
//! value of the current working set is cached in an [`Incumbent`], which makes
//! each marginal gain cost a single evaluation.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};
use std::convert::Infallible;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SetError {
    #[error("element {id} is outside the ground set of size {size}")]
    OutOfRange { id: usize, size: usize },
    #[error("element {0} is already in the set")]
    AlreadyMember(usize),
    #[error("element {0} is not in the set")]
    NotMember(usize),
    #[error("set over {left} elements combined with set over {right}")]
    UniverseMismatch { left: usize, right: usize },
}

/// Dense ground set `{0, .., size-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GroundSet {
    size: usize,
}

impl GroundSet {
    pub fn new(size: usize) -> Self {
        Self { size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn ids(&self) -> std::ops::Range<usize> {
        0..self.size
    }

    pub fn contains(&self, id: usize) -> bool {
        id < self.size
    }
}

/// Subset of a [`GroundSet`], iterated in increasing id order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ElementSet {
    universe: usize,
    members: BTreeSet<usize>,
}

impl ElementSet {
    pub fn empty(universe: usize) -> Self {
        Self {
            universe,
            members: BTreeSet::new(),
        }
    }

    pub fn full(universe: usize) -> Self {
        Self {
            universe,
            members: (0..universe).collect(),
        }
    }

    pub fn from_ids<I: IntoIterator<Item = usize>>(universe: usize, ids: I) -> Result<Self, SetError> {
        let mut set = Self::empty(universe);
        for id in ids {
            if id >= universe {
                return Err(SetError::OutOfRange { id, size: universe });
            }
            set.members.insert(id);
        }
        Ok(set)
    }

    /// Bit `i` of `mask` selects element `i`. Requires `universe <= 64`.
    pub fn from_mask(universe: usize, mask: u64) -> Self {
        debug_assert!(universe <= 64);
        let members = (0..universe).filter(|i| mask >> i & 1 == 1).collect();
        Self { universe, members }
    }

    pub fn to_mask(&self) -> u64 {
        debug_assert!(self.universe <= 64);
        self.members.iter().fold(0u64, |m, &i| m | 1 << i)
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: usize) -> bool {
        self.members.contains(&id)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.members.iter().copied()
    }

    fn check(&self, id: usize) -> Result<(), SetError> {
        if id >= self.universe {
            Err(SetError::OutOfRange {
                id,
                size: self.universe,
            })
        } else {
            Ok(())
        }
    }

    pub fn insert(&mut self, id: usize) -> Result<(), SetError> {
        self.check(id)?;
        if !self.members.insert(id) {
            return Err(SetError::AlreadyMember(id));
        }
        Ok(())
    }

    pub fn remove(&mut self, id: usize) -> Result<(), SetError> {
        self.check(id)?;
        if !self.members.remove(&id) {
            return Err(SetError::NotMember(id));
        }
        Ok(())
    }

    pub fn with(&self, id: usize) -> Result<Self, SetError> {
        let mut s = self.clone();
        s.insert(id)?;
        Ok(s)
    }

    pub fn without(&self, id: usize) -> Result<Self, SetError> {
        let mut s = self.clone();
        s.remove(id)?;
        Ok(s)
    }

    pub fn complement(&self) -> Self {
        Self {
            universe: self.universe,
            members: (0..self.universe).filter(|i| !self.members.contains(i)).collect(),
        }
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.members.is_subset(&other.members)
    }

    // Toggles used by the search loops; ids are validated by the callers.
    fn flip(&mut self, id: usize) {
        if !self.members.remove(&id) {
            self.members.insert(id);
        }
    }
}

/// Objective `F` over subsets of a ground set.
///
/// `eval` is the only access path; implementations count every call.
/// `Stop` is the signal an evaluation may raise instead of a value (an
/// exhausted query budget, a successful attack). Pure functions use
/// [`Infallible`].
pub trait SetFunction {
    type Stop;

    fn ground_size(&self) -> usize;

    fn eval(&mut self, set: &ElementSet) -> Result<f64, Self::Stop>;

    fn eval_count(&self) -> u64;
}

/// Wraps a closure as a counted, infallible set function.
pub struct FnSet<G> {
    size: usize,
    func: G,
    count: u64,
}

impl<G: FnMut(&ElementSet) -> f64> FnSet<G> {
    pub fn new(size: usize, func: G) -> Self {
        Self { size, func, count: 0 }
    }
}

impl<G: FnMut(&ElementSet) -> f64> SetFunction for FnSet<G> {
    type Stop = Infallible;

    fn ground_size(&self) -> usize {
        self.size
    }

    fn eval(&mut self, set: &ElementSet) -> Result<f64, Infallible> {
        self.count += 1;
        Ok((self.func)(set))
    }

    fn eval_count(&self) -> u64 {
        self.count
    }
}

#[derive(Debug, Error)]
pub enum GainError<S> {
    #[error(transparent)]
    Domain(#[from] SetError),
    #[error("evaluation stopped")]
    Stopped(S),
}

/// `F(S ∪ {e}) − F(S)`. Pass `cached` to reuse a known `F(S)` and spend one
/// evaluation instead of two.
pub fn marginal_gain<F: SetFunction>(
    f: &mut F,
    set: &ElementSet,
    element: usize,
    cached: Option<f64>,
) -> Result<f64, GainError<F::Stop>> {
    let grown = set.with(element)?;
    let base = match cached {
        Some(v) => v,
        None => f.eval(set).map_err(GainError::Stopped)?,
    };
    let top = f.eval(&grown).map_err(GainError::Stopped)?;
    Ok(top - base)
}

/// `F(S ∖ {e}) − F(S)`.
pub fn deletion_gain<F: SetFunction>(
    f: &mut F,
    set: &ElementSet,
    element: usize,
    cached: Option<f64>,
) -> Result<f64, GainError<F::Stop>> {
    let shrunk = set.without(element)?;
    let base = match cached {
        Some(v) => v,
        None => f.eval(set).map_err(GainError::Stopped)?,
    };
    let low = f.eval(&shrunk).map_err(GainError::Stopped)?;
    Ok(low - base)
}

/// Working set together with its cached objective value.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub set: ElementSet,
    pub value: f64,
}

impl Incumbent {
    /// Evaluates `set` once and caches the value.
    pub fn evaluate<F: SetFunction>(f: &mut F, set: ElementSet) -> Result<Self, F::Stop> {
        let value = f.eval(&set)?;
        Ok(Self { set, value })
    }
}

/// Cached bound on an element's gain. `epoch` is the number of mutations the
/// working set had seen when `bound` was computed; an entry whose epoch equals
/// the current one is exact.
#[derive(Debug, Clone, Copy)]
pub struct HeapEntry {
    pub element: usize,
    pub bound: f64,
    pub epoch: u64,
    /// `F` of the neighbouring set the bound was computed from.
    value: f64,
}

impl HeapEntry {
    /// Heap order: larger bound first, then smaller element id.
    fn rank(&self, other: &Self) -> Ordering {
        self.bound
            .total_cmp(&other.bound)
            .then_with(|| other.element.cmp(&self.element))
    }
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.rank(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.rank(other)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Direction {
    Insert,
    Delete,
}

/// Evaluation bookkeeping for one insertion or deletion phase.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PhaseTrace {
    /// Evaluations spent seeding the heap (or, for the naive variants, the
    /// first full scan).
    pub initial_evals: u64,
    /// Evaluations spent refreshing stale bounds (naive: later scans).
    pub refresh_evals: u64,
    /// Accepted elements, in order.
    pub accepted: Vec<usize>,
    /// Incumbent value after each accepted move.
    pub values: Vec<f64>,
}

impl PhaseTrace {
    pub fn evals(&self) -> u64 {
        self.initial_evals + self.refresh_evals
    }

    pub fn changed(&self) -> bool {
        !self.accepted.is_empty()
    }
}

// Evaluates the incumbent with `element` toggled; the set is restored before
// returning, even when the evaluation stops.
fn probe<F: SetFunction>(f: &mut F, set: &mut ElementSet, element: usize) -> Result<f64, F::Stop> {
    set.flip(element);
    let out = f.eval(set);
    set.flip(element);
    out
}

fn lazy_phase<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    candidates: &[usize],
    dir: Direction,
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    let mut heap = BinaryHeap::with_capacity(candidates.len());
    let mut epoch = 0u64;
    for &e in candidates {
        debug_assert!(e < inc.set.universe());
        let eligible = match dir {
            Direction::Insert => !inc.set.contains(e),
            Direction::Delete => inc.set.contains(e),
        };
        if !eligible {
            continue;
        }
        let value = probe(f, &mut inc.set, e)?;
        trace.initial_evals += 1;
        heap.push(HeapEntry {
            element: e,
            bound: value - inc.value,
            epoch,
            value,
        });
    }

    while let Some(mut top) = heap.pop() {
        if top.epoch != epoch {
            top.value = probe(f, &mut inc.set, top.element)?;
            top.bound = top.value - inc.value;
            top.epoch = epoch;
            trace.refresh_evals += 1;
            // Still ahead of (or tied in heap order with) every other cached
            // bound: it is the best candidate. Otherwise requeue with the
            // refreshed bound; an exact entry is never refreshed twice, so
            // this always makes progress.
            if let Some(next) = heap.peek() {
                if top.rank(next) == Ordering::Less {
                    heap.push(top);
                    continue;
                }
            }
        }
        if top.bound > 0.0 {
            inc.set.flip(top.element);
            inc.value = top.value;
            epoch += 1;
            trace.accepted.push(top.element);
            trace.values.push(inc.value);
        } else {
            break;
        }
    }
    Ok(())
}

/// Lazy greedy insertion over the elements of `pool` not yet in the working
/// set. Accepts an element only when its refreshed gain is strictly positive
/// and it still tops the heap; ends the phase at the first refreshed top with
/// gain `<= 0`.
///
/// On a stop signal the incumbent holds the last accepted state and the trace
/// covers the evaluations made so far.
pub fn lazy_greedy_insert<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    pool: &[usize],
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    lazy_phase(f, inc, pool, Direction::Insert, trace)
}

/// Lazy greedy deletion over the members of the working set that appear in
/// `pool`.
pub fn lazy_greedy_delete<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    pool: &[usize],
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    lazy_phase(f, inc, pool, Direction::Delete, trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LocalSearchConfig {
    pub max_iter: usize,
    /// Finish with the better of `S` and its complement.
    pub return_best_side: bool,
}

impl Default for LocalSearchConfig {
    fn default() -> Self {
        Self {
            max_iter: 1,
            return_best_side: true,
        }
    }
}

/// Alternates lazy insertion and lazy deletion for `cfg.max_iter` rounds over
/// the whole ground set, then optionally swaps to the complement when it
/// scores higher (one extra evaluation).
pub fn local_search<F: SetFunction>(
    f: &mut F,
    start: ElementSet,
    cfg: LocalSearchConfig,
) -> Result<Incumbent, F::Stop> {
    assert!(cfg.max_iter >= 1, "max_iter must be positive");
    let pool: Vec<usize> = (0..f.ground_size()).collect();
    let mut inc = Incumbent::evaluate(f, start)?;
    for _ in 0..cfg.max_iter {
        let mut trace = PhaseTrace::default();
        lazy_greedy_insert(f, &mut inc, &pool, &mut trace)?;
        lazy_greedy_delete(f, &mut inc, &pool, &mut trace)?;
    }
    if cfg.return_best_side {
        let other = inc.set.complement();
        let value = f.eval(&other)?;
        if value > inc.value {
            inc = Incumbent { set: other, value };
        }
    }
    Ok(inc)
}

fn naive_phase<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    pool: &[usize],
    dir: Direction,
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    let mut first = true;
    loop {
        let mut best: Option<(usize, f64, f64)> = None;
        for &e in pool {
            let eligible = match dir {
                Direction::Insert => !inc.set.contains(e),
                Direction::Delete => inc.set.contains(e),
            };
            if !eligible {
                continue;
            }
            let value = probe(f, &mut inc.set, e)?;
            if first {
                trace.initial_evals += 1;
            } else {
                trace.refresh_evals += 1;
            }
            let gain = value - inc.value;
            let better = match best {
                None => true,
                Some((b, g, _)) => gain.total_cmp(&g).then_with(|| b.cmp(&e)) == Ordering::Greater,
            };
            if better {
                best = Some((e, gain, value));
            }
        }
        first = false;
        match best {
            Some((e, gain, value)) if gain > 0.0 => {
                inc.set.flip(e);
                inc.value = value;
                trace.accepted.push(e);
                trace.values.push(value);
            }
            _ => return Ok(()),
        }
    }
}

/// Plain greedy insertion: rescans every candidate each step and inserts the
/// argmax (smallest id on ties) while its gain is positive.
pub fn naive_greedy_insert<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    pool: &[usize],
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    naive_phase(f, inc, pool, Direction::Insert, trace)
}

pub fn naive_greedy_delete<F: SetFunction>(
    f: &mut F,
    inc: &mut Incumbent,
    pool: &[usize],
    trace: &mut PhaseTrace,
) -> Result<(), F::Stop> {
    naive_phase(f, inc, pool, Direction::Delete, trace)
}

/// Plain local search from `start`. With `until_convergence` the
/// insert/delete passes repeat until a full pass changes nothing, so the
/// result is a local optimum; otherwise a single pass runs.
pub fn naive_local_search<F: SetFunction>(
    f: &mut F,
    start: ElementSet,
    until_convergence: bool,
) -> Result<Incumbent, F::Stop> {
    let pool: Vec<usize> = (0..f.ground_size()).collect();
    let mut inc = Incumbent::evaluate(f, start)?;
    loop {
        let mut trace = PhaseTrace::default();
        naive_greedy_insert(f, &mut inc, &pool, &mut trace)?;
        naive_greedy_delete(f, &mut inc, &pool, &mut trace)?;
        if !until_convergence || !trace.changed() {
            return Ok(inc);
        }
    }
}

/// No single insertion or deletion improves `F(S)`. Costs `|V| + 1`
/// evaluations.
pub fn is_local_optimum<F: SetFunction>(f: &mut F, set: &ElementSet) -> Result<bool, F::Stop> {
    let mut work = set.clone();
    let base = f.eval(&work)?;
    let mut ok = true;
    for e in 0..f.ground_size() {
        if probe(f, &mut work, e)? > base {
            ok = false;
        }
    }
    Ok(ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modular(weights: Vec<f64>) -> FnSet<impl FnMut(&ElementSet) -> f64> {
        let n = weights.len();
        FnSet::new(n, move |s: &ElementSet| s.iter().map(|i| weights[i]).sum())
    }

    // log(1 + exp(x1 + x2)) at x = (±1, ±1): +1 where the element is selected.
    fn logistic_pair() -> FnSet<impl FnMut(&ElementSet) -> f64> {
        FnSet::new(2, |s: &ElementSet| {
            let z: f64 = (0..2).map(|i| if s.contains(i) { 1.0 } else { -1.0 }).sum();
            z.exp().ln_1p()
        })
    }

    fn ids(s: &ElementSet) -> Vec<usize> {
        s.iter().collect()
    }

    fn set(n: usize, v: &[usize]) -> ElementSet {
        ElementSet::from_ids(n, v.iter().copied()).unwrap()
    }

    #[test]
    fn element_set_rejects_bad_ids() {
        assert_eq!(
            ElementSet::from_ids(3, [3]),
            Err(SetError::OutOfRange { id: 3, size: 3 })
        );
        let mut s = set(3, &[1]);
        assert_eq!(s.insert(1), Err(SetError::AlreadyMember(1)));
        assert_eq!(s.remove(2), Err(SetError::NotMember(2)));
        assert_eq!(ids(&s.complement()), vec![0, 2]);
        assert_eq!(ElementSet::from_mask(4, 0b1010), set(4, &[1, 3]));
        assert_eq!(set(4, &[0, 2]).to_mask(), 0b101);
    }

    #[test]
    fn marginal_gains_on_counterexample() {
        let mut f = logistic_pair();
        let g0 = marginal_gain(&mut f, &set(2, &[]), 1, None).unwrap();
        let g1 = marginal_gain(&mut f, &set(2, &[0]), 1, None).unwrap();
        assert!((g0 - 0.5662).abs() < 1e-3, "{g0}");
        assert!((g1 - 1.4338).abs() < 1e-3, "{g1}");
        assert_eq!(f.eval_count(), 4);
    }

    #[test]
    fn marginal_gain_counts_and_domain() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        let s = set(3, &[0]);
        assert_eq!(marginal_gain(&mut f, &s, 1, None).unwrap(), -1.0);
        assert_eq!(f.eval_count(), 2);
        assert_eq!(marginal_gain(&mut f, &s, 1, Some(3.0)).unwrap(), -1.0);
        assert_eq!(f.eval_count(), 3);
        assert!(matches!(
            marginal_gain(&mut f, &s, 0, None),
            Err(GainError::Domain(SetError::AlreadyMember(0)))
        ));
        assert!(matches!(
            marginal_gain(&mut f, &s, 7, None),
            Err(GainError::Domain(SetError::OutOfRange { .. }))
        ));
    }

    #[test]
    fn deletion_gains() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        assert_eq!(deletion_gain(&mut f, &set(3, &[0, 1]), 1, None).unwrap(), 1.0);
        assert_eq!(deletion_gain(&mut f, &set(3, &[0]), 0, None).unwrap(), -3.0);
        assert!(matches!(
            deletion_gain(&mut f, &set(3, &[0]), 2, None),
            Err(GainError::Domain(SetError::NotMember(2)))
        ));
        let mut flat = FnSet::new(1, |_: &ElementSet| 4.0);
        assert_eq!(deletion_gain(&mut flat, &set(1, &[0]), 0, None).unwrap(), 0.0);
    }

    #[test]
    fn lazy_insert_modular() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        let mut inc = Incumbent::evaluate(&mut f, set(3, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_insert(&mut f, &mut inc, &[0, 1, 2], &mut tr).unwrap();
        assert_eq!(ids(&inc.set), vec![0, 2]);
        assert_eq!(inc.value, 5.0);
        assert_eq!(tr.accepted, vec![0, 2]);
        assert_eq!(tr.values, vec![3.0, 5.0]);
        // 1 incumbent + 3 seeds + refreshes of 2 (once) and 1 (once).
        assert_eq!(tr.initial_evals, 3);
        assert_eq!(tr.refresh_evals, 2);
        assert_eq!(f.eval_count(), 1 + tr.evals());
    }

    #[test]
    fn lazy_insert_empty_pool() {
        let mut f = modular(vec![]);
        let mut inc = Incumbent::evaluate(&mut f, set(0, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_insert(&mut f, &mut inc, &[], &mut tr).unwrap();
        assert!(inc.set.is_empty());
        assert_eq!(tr.evals(), 0);
    }

    #[test]
    fn lazy_insert_counterexample_takes_both() {
        let mut f = logistic_pair();
        let mut inc = Incumbent::evaluate(&mut f, set(2, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_insert(&mut f, &mut inc, &[0, 1], &mut tr).unwrap();
        assert_eq!(ids(&inc.set), vec![0, 1]);
        assert!((inc.value - 2.1269).abs() < 1e-4);
    }

    #[test]
    fn lazy_delete_cases() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        let mut inc = Incumbent::evaluate(&mut f, set(3, &[0, 1, 2])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_delete(&mut f, &mut inc, &[0, 1, 2], &mut tr).unwrap();
        assert_eq!(ids(&inc.set), vec![0, 2]);

        let mut f = modular(vec![3.0, 1.0, 2.0]);
        let mut inc = Incumbent::evaluate(&mut f, set(3, &[0, 1, 2])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_delete(&mut f, &mut inc, &[0, 1, 2], &mut tr).unwrap();
        assert_eq!(ids(&inc.set), vec![0, 1, 2]);
        assert!(!tr.changed());

        let mut inc = Incumbent::evaluate(&mut f, set(3, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_delete(&mut f, &mut inc, &[0, 1, 2], &mut tr).unwrap();
        assert!(inc.set.is_empty());
        assert_eq!(tr.evals(), 0);
    }

    #[test]
    fn local_search_examples() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        let out = local_search(&mut f, set(3, &[]), LocalSearchConfig::default()).unwrap();
        assert_eq!(ids(&out.set), vec![0, 2]);
        assert_eq!(out.value, 5.0);

        let mut zero = FnSet::new(4, |_: &ElementSet| 0.0);
        let cfg = LocalSearchConfig {
            max_iter: 1,
            return_best_side: false,
        };
        let out = local_search(&mut zero, set(4, &[1, 3]), cfg).unwrap();
        assert_eq!(ids(&out.set), vec![1, 3]);

        let mut f = logistic_pair();
        let out = local_search(&mut f, set(2, &[]), LocalSearchConfig::default()).unwrap();
        assert_eq!(ids(&out.set), vec![0, 1]);
        assert!((out.value - 2.1269).abs() < 1e-4);
    }

    #[test]
    fn best_side_swaps_to_complement() {
        // F is maximised by the full set, but no single insertion from ∅ helps.
        let mut f = FnSet::new(2, |s: &ElementSet| match s.len() {
            0 => 1.0,
            1 => 0.0,
            _ => 5.0,
        });
        let out = local_search(&mut f, set(2, &[]), LocalSearchConfig::default()).unwrap();
        assert_eq!(ids(&out.set), vec![0, 1]);
        assert_eq!(out.value, 5.0);
    }

    #[test]
    fn naive_variants() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        let mut inc = Incumbent::evaluate(&mut f, set(3, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        naive_greedy_insert(&mut f, &mut inc, &[0, 1, 2], &mut tr).unwrap();
        assert_eq!(ids(&inc.set), vec![0, 2]);
        // Scans of 3, 2, 1 candidates.
        assert_eq!(tr.evals(), 6);

        let mut zero = FnSet::new(3, |_: &ElementSet| 0.0);
        let out = naive_local_search(&mut zero, set(3, &[2]), true).unwrap();
        assert_eq!(ids(&out.set), vec![2]);
    }

    #[test]
    fn local_optimum_checks() {
        let mut f = modular(vec![3.0, -1.0, 2.0]);
        assert!(is_local_optimum(&mut f, &set(3, &[0, 2])).unwrap());
        assert_eq!(f.eval_count(), 4);
        assert!(!is_local_optimum(&mut f, &set(3, &[0, 1])).unwrap());
        let mut empty = modular(vec![]);
        assert!(is_local_optimum(&mut empty, &set(0, &[])).unwrap());
    }

    #[test]
    fn ties_resolve_to_smaller_id() {
        let mut f = modular(vec![1.0, 2.0, 2.0, 2.0]);
        let mut inc = Incumbent::evaluate(&mut f, set(4, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        lazy_greedy_insert(&mut f, &mut inc, &[3, 2, 1, 0], &mut tr).unwrap();
        assert_eq!(tr.accepted, vec![1, 2, 3, 0]);
    }

    #[test]
    fn stop_restores_incumbent() {
        struct Capped {
            left: u32,
            count: u64,
        }
        impl SetFunction for Capped {
            type Stop = ();
            fn ground_size(&self) -> usize {
                3
            }
            fn eval(&mut self, s: &ElementSet) -> Result<f64, ()> {
                if self.left == 0 {
                    return Err(());
                }
                self.left -= 1;
                self.count += 1;
                Ok(s.iter().map(|i| [3.0, -1.0, 2.0][i]).sum())
            }
            fn eval_count(&self) -> u64 {
                self.count
            }
        }
        // 1 incumbent + 3 seeds, accept 0, then budget runs out refreshing 2.
        let mut f = Capped { left: 4, count: 0 };
        let mut inc = Incumbent::evaluate(&mut f, set(3, &[])).unwrap();
        let mut tr = PhaseTrace::default();
        assert!(lazy_greedy_insert(&mut f, &mut inc, &[0, 1, 2], &mut tr).is_err());
        assert_eq!(ids(&inc.set), vec![0]);
        assert_eq!(inc.value, 3.0);
        assert_eq!(f.eval_count(), 1 + tr.evals());
    }
}
