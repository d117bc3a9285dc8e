//! Seeded random set-function families for the property suites.

use rand::Rng;

use super::SetTable;

/// `F(S) = Σ_{i∈S} w_i`.
pub fn modular(weights: &[f64]) -> SetTable {
    SetTable::from_mask_fn(weights.len(), |m| {
        weights
            .iter()
            .enumerate()
            .filter(|(i, _)| m >> i & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    })
    .expect("modular instances stay within the table size guard")
}

/// Weighted coverage: element `i` covers the items in `covers[i]` (a bitmask);
/// `F(S)` is the total weight of items covered by `S`. Monotone submodular.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCoverage {
    pub covers: Vec<u64>,
    pub item_weights: Vec<f64>,
}

impl WeightedCoverage {
    /// `n` elements over `2n` items (at most 64), each covered with
    /// probability 0.35. Weights are integers in `1..=1000`, so every sum is
    /// exact and submodularity holds without rounding noise.
    pub fn random<R: Rng>(n: usize, rng: &mut R) -> Self {
        let items = (2 * n).clamp(1, 64);
        let covers = (0..n)
            .map(|_| (0..items).filter(|_| rng.gen_bool(0.35)).fold(0u64, |m, j| m | 1 << j))
            .collect();
        let item_weights = (0..items).map(|_| rng.gen_range(1..=1000) as f64).collect();
        Self { covers, item_weights }
    }

    pub fn value(&self, mask: u64) -> f64 {
        let covered = self
            .covers
            .iter()
            .enumerate()
            .filter(|(i, _)| mask >> i & 1 == 1)
            .fold(0u64, |acc, (_, c)| acc | c);
        self.item_weights
            .iter()
            .enumerate()
            .filter(|(j, _)| covered >> j & 1 == 1)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn table(&self) -> SetTable {
        SetTable::from_mask_fn(self.covers.len(), |m| self.value(m))
            .expect("coverage instances stay within the table size guard")
    }
}

/// Independent uniform `[0, 1)` value for every subset: generically neither
/// submodular nor monotone.
pub fn random_table<R: Rng>(n: usize, rng: &mut R) -> SetTable {
    let values = (0..1u64 << n).map(|_| rng.gen::<f64>()).collect();
    SetTable::new(n, values).expect("random tables stay within the table size guard")
}

/// Random modular weights in `[-1, 1)`.
pub fn random_modular<R: Rng>(n: usize, rng: &mut R) -> SetTable {
    let w: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    modular(&w)
}

/// `F(S) = log(1 + exp(Σ_i ±1))` on two elements: `+1` for selected
/// coordinates. The smallest instance where the attack objective fails
/// diminishing returns.
pub fn logistic_counterexample() -> SetTable {
    SetTable::from_mask_fn(2, |m| {
        let z: f64 = (0..2).map(|i| if m >> i & 1 == 1 { 1.0 } else { -1.0 }).sum();
        z.exp().ln_1p()
    })
    .expect("two elements")
}
