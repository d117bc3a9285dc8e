//! Exhaustive checkers for the approximation theory behind the local search.
//!
//! Everything works on a [`SetTable`] holding `F` for all `2^n` subsets, so a
//! checker never spends oracle queries of its own. Subsets are `u64`
//! bitmasks; bit `i` is element `i`. Inequalities are tested with an absolute
//! slack of [`TOLERANCE`].
//!
//! The submodularity index is
//! `λ_F(L, k) = min { Σ_{x∈S} F_x(A) − F_S(A) : A ⊆ L, S ∩ A = ∅, |S| ≤ k }`
//! with `F_S(A) = F(A ∪ S) − F(A)`. `S` ranges over the whole ground set
//! minus `A`; sets with `|S| ≤ 1` contribute 0, so `λ ≤ 0` always.

pub mod instances;

use std::convert::Infallible;

use thiserror::Error;

use crate::setfn::{naive_local_search, ElementSet, SetFunction};

pub const TOLERANCE: f64 = 1e-9;

/// Largest ground set a table may hold.
pub const MAX_TABLE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnalysisError {
    #[error("{what} is limited to ground sets of {max} elements, got {n}")]
    TooLarge { what: &'static str, n: usize, max: usize },
    #[error("table for {n} elements needs {expected} values, got {got}")]
    TableShape { n: usize, expected: usize, got: usize },
}

fn guard(what: &'static str, n: usize, max: usize) -> Result<(), AnalysisError> {
    if n > max {
        Err(AnalysisError::TooLarge { what, n, max })
    } else {
        Ok(())
    }
}

fn choose2(m: u64) -> u64 {
    m * m.saturating_sub(1) / 2
}

fn pop(m: u64) -> u64 {
    u64::from(m.count_ones())
}

/// `F` tabulated over every subset; also a counted [`SetFunction`].
#[derive(Debug, Clone, PartialEq)]
pub struct SetTable {
    n: usize,
    values: Vec<f64>,
    count: u64,
}

impl SetTable {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self, AnalysisError> {
        guard("a set table", n, MAX_TABLE)?;
        if values.len() != 1 << n {
            return Err(AnalysisError::TableShape {
                n,
                expected: 1 << n,
                got: values.len(),
            });
        }
        Ok(Self { n, values, count: 0 })
    }

    pub fn from_mask_fn(n: usize, f: impl Fn(u64) -> f64) -> Result<Self, AnalysisError> {
        guard("a set table", n, MAX_TABLE)?;
        Self::new(n, (0..1u64 << n).map(f).collect())
    }

    /// Tabulates `f` with `2^n` evaluations.
    pub fn tabulate<F: SetFunction<Stop = Infallible>>(f: &mut F) -> Result<Self, AnalysisError> {
        let n = f.ground_size();
        guard("a set table", n, MAX_TABLE)?;
        let values = (0..1u64 << n)
            .map(|m| {
                let Ok(v) = f.eval(&ElementSet::from_mask(n, m));
                v
            })
            .collect();
        Self::new(n, values)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn full(&self) -> u64 {
        (1u64 << self.n) - 1
    }

    pub fn get(&self, mask: u64) -> f64 {
        self.values[mask as usize]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// `F + c` with `c = −min F` when `F` takes negative values, so that the
    /// result is non-negative with minimum exactly 0.
    pub fn offset_nonnegative(&self) -> (Self, f64) {
        let min = self.min_value();
        if min >= 0.0 {
            return (self.clone(), 0.0);
        }
        let shifted = self.values.iter().map(|v| v - min).collect();
        (Self::new(self.n, shifted).expect("same shape"), -min)
    }

    /// `F(A ∪ {x}) − F(A)`.
    fn gain(&self, a: u64, x: usize) -> f64 {
        self.get(a | 1 << x) - self.get(a)
    }
}

impl SetFunction for SetTable {
    type Stop = Infallible;

    fn ground_size(&self) -> usize {
        self.n
    }

    fn eval(&mut self, set: &ElementSet) -> Result<f64, Infallible> {
        self.count += 1;
        Ok(self.get(set.to_mask()))
    }

    fn eval_count(&self) -> u64 {
        self.count
    }
}

/// Global maximiser; ties go to the smallest bitmask.
pub fn brute_force_optimum(table: &SetTable) -> (ElementSet, f64) {
    let mut best = (0u64, table.get(0));
    for m in 1..=table.full() {
        if table.get(m) > best.1 {
            best = (m, table.get(m));
        }
    }
    (ElementSet::from_mask(table.n, best.0), best.1)
}

/// Violation of diminishing returns: `Δ(e|A) < Δ(e|B)` with `A ⊆ B`, `e ∉ B`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubmodularityWitness {
    pub a: ElementSet,
    pub b: ElementSet,
    pub element: usize,
    pub gain_a: f64,
    pub gain_b: f64,
}

pub const MAX_SUBMODULARITY_CHECK: usize = 12;

/// Checks `Δ(e|A) ≥ Δ(e|B)` for all `A ⊆ B`, `e ∉ B`, returning the first
/// violation in (A, B, e) ascending order.
pub fn is_submodular(table: &SetTable) -> Result<Option<SubmodularityWitness>, AnalysisError> {
    guard("the submodularity check", table.n, MAX_SUBMODULARITY_CHECK)?;
    let full = table.full();
    for a in 0..=full {
        let rest = full & !a;
        // Supersets b = a | t of a, in increasing order of t.
        let mut t = 0u64;
        loop {
            let b = a | t;
            for e in (0..table.n).filter(|e| b >> e & 1 == 0) {
                let (ga, gb) = (table.gain(a, e), table.gain(b, e));
                if ga < gb - TOLERANCE {
                    return Ok(Some(SubmodularityWitness {
                        a: ElementSet::from_mask(table.n, a),
                        b: ElementSet::from_mask(table.n, b),
                        element: e,
                        gain_a: ga,
                        gain_b: gb,
                    }));
                }
            }
            if t == rest {
                break;
            }
            t = ((t | !rest).wrapping_add(1)) & rest;
        }
    }
    Ok(None)
}

fn phi(table: &SetTable, s: u64, a: u64) -> f64 {
    let singles: f64 = (0..table.n).filter(|x| s >> x & 1 == 1).map(|x| table.gain(a, x)).sum();
    singles - (table.get(a | s) - table.get(a))
}

pub const MAX_SMI: usize = 12;

/// `λ_F(L, k)` by enumeration of all `(S, A)` pairs.
pub fn submodularity_index(table: &SetTable, l: u64, k: usize) -> Result<f64, AnalysisError> {
    guard("the submodularity index", table.n, MAX_SMI)?;
    let full = table.full();
    let mut best = 0.0f64;
    let mut a = 0u64;
    loop {
        // submasks of l
        let rest = full & !a;
        let mut s = rest;
        loop {
            let size = s.count_ones() as usize;
            if (2..=k).contains(&size) {
                best = best.min(phi(table, s, a));
            }
            if s == 0 {
                break;
            }
            s = (s - 1) & rest;
        }
        if a == l {
            break;
        }
        a = ((a | !l).wrapping_add(1)) & l;
    }
    Ok(best)
}

/// `λ_F(L, 2)` for every `L`, by a subset-minimum sweep over the per-`A`
/// pair minima.
pub fn pairwise_index_table(table: &SetTable) -> Result<Vec<f64>, AnalysisError> {
    guard("the submodularity index", table.n, MAX_TABLE)?;
    let n = table.n;
    let mut lam: Vec<f64> = (0..=table.full())
        .map(|a| {
            let mut m = 0.0f64;
            for x in (0..n).filter(|x| a >> x & 1 == 0) {
                for y in (x + 1..n).filter(|y| a >> y & 1 == 0) {
                    m = m.min(phi(table, 1 << x | 1 << y, a));
                }
            }
            m
        })
        .collect();
    for bit in 0..n {
        for mask in 0..lam.len() {
            if mask >> bit & 1 == 1 {
                lam[mask] = lam[mask].min(lam[mask ^ 1 << bit]);
            }
        }
    }
    Ok(lam)
}

/// `C(|S∖C|, 2) + C(|C∖S|, 2) + |V∖(S∪C)|·|S| + |C∖S|·|S∩C|`.
pub fn xi(s: &ElementSet, c: &ElementSet) -> u64 {
    let full = (1u128 << s.universe()) - 1;
    let (sm, cm) = (s.to_mask(), c.to_mask());
    let outside = (full as u64) & !(sm | cm);
    choose2(pop(sm & !cm)) + choose2(pop(cm & !sm)) + pop(outside) * pop(sm) + pop(cm & !sm) * pop(sm & cm)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TheoremReport {
    /// Constant added to make `F` non-negative (0 if it already was).
    pub offset: f64,
    pub s: ElementSet,
    pub c: ElementSet,
    pub f_s: f64,
    pub f_c: f64,
    pub f_complement: f64,
    pub lambda: f64,
    pub xi: u64,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

pub const MAX_THEOREM: usize = 10;

/// Runs plain local search from `∅` to convergence on the offset table and
/// tests `2F(S) + F(V∖S) ≥ F(C) + ξ λ_F(V, 2)`.
pub fn check_theorem1(table: &SetTable) -> Result<TheoremReport, AnalysisError> {
    guard("the approximation check", table.n, MAX_THEOREM)?;
    let (mut f, offset) = table.offset_nonnegative();
    let start = ElementSet::empty(f.n);
    let Ok(local) = naive_local_search(&mut f, start, true);
    let (c, f_c) = brute_force_optimum(&f);
    let lambda = submodularity_index(&f, f.full(), 2)?;
    let xi = xi(&local.set, &c);
    let f_s = f.get(local.set.to_mask());
    let f_complement = f.get(f.full() & !local.set.to_mask());
    let lhs = 2.0 * f_s + f_complement;
    let rhs = f_c + xi as f64 * lambda;
    Ok(TheoremReport {
        offset,
        s: local.set,
        c,
        f_s,
        f_c,
        f_complement,
        lambda,
        xi,
        lhs,
        rhs,
        holds: lhs >= rhs - TOLERANCE,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Holds,
    Violated,
    /// `F(C) + ξλ < 0`: the statement makes no claim.
    Skipped,
}

/// `max(F(S), F(V∖S)) ≥ (F(C) + ξλ) / 3` when the right side is non-negative.
pub fn check_corollary1(table: &SetTable) -> Result<Verdict, AnalysisError> {
    let r = check_theorem1(table)?;
    Ok(if r.rhs < 0.0 {
        Verdict::Skipped
    } else if r.f_s.max(r.f_complement) >= r.rhs / 3.0 - TOLERANCE {
        Verdict::Holds
    } else {
        Verdict::Violated
    })
}

/// Checked instances and violations of one inequality family.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Tally {
    pub checked: u64,
    pub violations: u64,
    /// Smallest `lhs − rhs` seen (negative means a violation).
    pub min_slack: f64,
}

impl Tally {
    fn new() -> Self {
        Self {
            checked: 0,
            violations: 0,
            min_slack: f64::INFINITY,
        }
    }

    /// Records `lhs ≥ rhs`.
    fn check(&mut self, lhs: f64, rhs: f64) {
        self.checked += 1;
        let slack = lhs - rhs;
        self.min_slack = self.min_slack.min(slack);
        if slack < -TOLERANCE {
            self.violations += 1;
        }
    }

    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LemmaReport {
    /// `F_x(A) − F_x(B) ≥ M λ_F(B, 2)` for `B = A ∪ Y`, `|Y| = M`, `x ∉ B`.
    pub lemma2: Tally,
    /// `F(A∪Y) − F(A) ≥ F(B∪Y) − F(B) + |B∖A|·|Y|·λ_F(B∪Y, 2)` for `A ⊆ B`,
    /// `Y ∩ B = ∅`.
    pub lemma3: Tally,
    /// For every local optimum `S` and `I ⊆ S ⊆ J`:
    /// `F(I) ≤ F(S) − C(|S∖I|, 2) λ_F(S, 2)` and
    /// `F(J) ≤ F(S) − C(|J∖S|, 2) λ_F(J, 2)`.
    pub lemma4: Tally,
    pub local_optima: usize,
}

impl LemmaReport {
    pub fn ok(&self) -> bool {
        self.lemma2.ok() && self.lemma3.ok() && self.lemma4.ok()
    }
}

pub const MAX_LEMMAS: usize = 8;

fn submasks(m: u64) -> impl Iterator<Item = u64> {
    let mut next = Some(m);
    std::iter::from_fn(move || {
        let cur = next?;
        next = if cur == 0 { None } else { Some((cur - 1) & m) };
        Some(cur)
    })
}

fn is_local_opt_mask(table: &SetTable, s: u64) -> bool {
    let v = table.get(s);
    (0..table.n).all(|e| table.get(s ^ 1 << e) <= v)
}

/// Exhaustive check of the three supporting inequalities.
pub fn check_appendix_lemmas(table: &SetTable) -> Result<LemmaReport, AnalysisError> {
    guard("the lemma check", table.n, MAX_LEMMAS)?;
    let lam = pairwise_index_table(table)?;
    let full = table.full();
    let n = table.n;

    let mut lemma2 = Tally::new();
    let mut lemma3 = Tally::new();
    for b in 0..=full {
        for a in submasks(b) {
            let m = pop(b & !a) as f64;
            for x in (0..n).filter(|x| b >> x & 1 == 0) {
                lemma2.check(table.gain(a, x) - table.gain(b, x), m * lam[b as usize]);
            }
            for y in submasks(full & !b) {
                let lhs = table.get(a | y) - table.get(a);
                let rhs = table.get(b | y) - table.get(b) + m * pop(y) as f64 * lam[(b | y) as usize];
                lemma3.check(lhs, rhs);
            }
        }
    }

    let mut lemma4 = Tally::new();
    let mut local_optima = 0;
    for s in (0..=full).filter(|&s| is_local_opt_mask(table, s)) {
        local_optima += 1;
        let fs = table.get(s);
        for i in submasks(s) {
            lemma4.check(fs - choose2(pop(s & !i)) as f64 * lam[s as usize], table.get(i));
        }
        for t in submasks(full & !s) {
            let j = s | t;
            lemma4.check(fs - choose2(pop(t)) as f64 * lam[j as usize], table.get(j));
        }
    }
    Ok(LemmaReport {
        lemma2,
        lemma3,
        lemma4,
        local_optima,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IndexReport {
    /// `λ_F(I, k) ≥ λ_F(J, k)` over all `I ⊆ J`.
    pub monotone: Tally,
    /// `−2F(C) ≤ λ_F(V, 2) ≤ 2F(C)` on the offset (non-negative) table.
    pub range: Tally,
    pub lambda_full: f64,
}

impl IndexReport {
    pub fn ok(&self) -> bool {
        self.monotone.ok() && self.range.ok()
    }
}

/// Monotonicity in `L` for cardinalities 2 and 3, and the range bound at the
/// optimum.
pub fn check_index_properties(table: &SetTable) -> Result<IndexReport, AnalysisError> {
    guard("the index check", table.n, MAX_LEMMAS)?;
    let full = table.full();
    let mut monotone = Tally::new();
    for k in [2usize, 3] {
        let lam: Vec<f64> = (0..=full)
            .map(|l| submodularity_index(table, l, k))
            .collect::<Result<_, _>>()?;
        for j in 0..=full {
            for i in submasks(j) {
                monotone.check(lam[i as usize], lam[j as usize]);
            }
        }
    }
    let (shifted, _) = table.offset_nonnegative();
    let lambda_full = submodularity_index(&shifted, full, 2)?;
    let (_, f_c) = brute_force_optimum(&shifted);
    let mut range = Tally::new();
    range.check(lambda_full, -2.0 * f_c);
    range.check(2.0 * f_c, lambda_full);
    Ok(IndexReport {
        monotone,
        range,
        lambda_full,
    })
}
