//! Zeroth-order attack objective: a classifier seen only through its loss,
//! with exact query accounting, a hard budget, and success detection.

use crate::blocks::{BlockError, BlockGrid};
use crate::setfn::{ElementSet, SetFunction};

/// Loss and prediction returned by one victim query.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossReport {
    /// Cross-entropy against the queried label.
    pub loss: f64,
    pub predicted: usize,
}

/// Classifier exposed as a loss oracle.
pub trait Victim {
    fn num_classes(&self) -> usize;

    fn input_dim(&self) -> usize;

    fn loss_report(&self, x: &[f64], label: usize) -> LossReport;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackMode {
    /// Maximise the loss of the true label; succeed on any misclassification.
    Untargeted { label: usize },
    /// Minimise the loss of the target; succeed when it is predicted.
    Targeted { target: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("query budget of {budget} exhausted")]
pub struct BudgetExhausted {
    pub budget: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryLedger {
    count: u64,
    budget: u64,
    success: bool,
    first_success_at: Option<u64>,
    trajectory: Vec<(u64, f64)>,
}

impl QueryLedger {
    pub fn new(budget: u64) -> Self {
        Self {
            count: 0,
            budget,
            success: false,
            first_success_at: None,
            trajectory: Vec::new(),
        }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn remaining(&self) -> u64 {
        self.budget - self.count
    }

    pub fn success(&self) -> bool {
        self.success
    }

    /// 1-based index of the first successful query.
    pub fn first_success_at(&self) -> Option<u64> {
        self.first_success_at
    }

    /// `(query index, objective value)` for every query made.
    pub fn trajectory(&self) -> &[(u64, f64)] {
        &self.trajectory
    }

    /// Lowers the budget; never raises it and never below the queries spent.
    pub fn cap_budget(&mut self, cap: u64) {
        self.budget = self.budget.min(cap).max(self.count);
    }
}

pub struct AttackObjective<'v, V: Victim + ?Sized> {
    victim: &'v V,
    mode: AttackMode,
    ledger: QueryLedger,
}

impl<'v, V: Victim + ?Sized> AttackObjective<'v, V> {
    pub fn new(victim: &'v V, mode: AttackMode, budget: u64) -> Self {
        Self {
            victim,
            mode,
            ledger: QueryLedger::new(budget),
        }
    }

    pub fn mode(&self) -> AttackMode {
        self.mode
    }

    pub fn ledger(&self) -> &QueryLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut QueryLedger {
        &mut self.ledger
    }

    pub fn victim(&self) -> &'v V {
        self.victim
    }

    /// One oracle query: `ℓ(x, y)` when untargeted, `−ℓ(x, t)` when targeted.
    pub fn evaluate(&mut self, x_adv: &[f64]) -> Result<f64, BudgetExhausted> {
        if self.ledger.count >= self.ledger.budget {
            return Err(BudgetExhausted {
                budget: self.ledger.budget,
            });
        }
        self.ledger.count += 1;
        let (value, fooled) = match self.mode {
            AttackMode::Untargeted { label } => {
                let r = self.victim.loss_report(x_adv, label);
                (r.loss, r.predicted != label)
            }
            AttackMode::Targeted { target } => {
                let r = self.victim.loss_report(x_adv, target);
                (-r.loss, r.predicted == target)
            }
        };
        if fooled && !self.ledger.success {
            self.ledger.success = true;
            self.ledger.first_success_at = Some(self.ledger.count);
        }
        self.ledger.trajectory.push((self.ledger.count, value));
        Ok(value)
    }
}

/// Why a block objective stopped answering.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AttackStop {
    BudgetExhausted,
    Succeeded,
}

/// The first successful probe of a [`BlockObjective`].
#[derive(Debug, Clone, PartialEq)]
pub struct SuccessfulProbe {
    pub set: ElementSet,
    pub image: Vec<f64>,
    pub value: f64,
}

/// `F(S) = f(x + ε Σ_{i∈S} e_i − ε Σ_{i∉S} e_i)` over the blocks of a grid.
///
/// With `stop_on_success` the first query that fools the victim is reported
/// as [`AttackStop::Succeeded`] and its set and image are kept.
pub struct BlockObjective<'a, 'v, V: Victim + ?Sized> {
    oracle: &'a mut AttackObjective<'v, V>,
    x: &'a [f64],
    grid: &'a BlockGrid,
    epsilon: f64,
    clip: bool,
    stop_on_success: bool,
    count: u64,
    buf: Vec<f64>,
    success: Option<SuccessfulProbe>,
}

impl<'a, 'v, V: Victim + ?Sized> BlockObjective<'a, 'v, V> {
    pub fn new(
        oracle: &'a mut AttackObjective<'v, V>,
        x: &'a [f64],
        grid: &'a BlockGrid,
        epsilon: f64,
        clip: bool,
    ) -> Result<Self, BlockError> {
        grid.spec().check(x)?;
        Ok(Self {
            oracle,
            x,
            grid,
            epsilon,
            clip,
            stop_on_success: true,
            count: 0,
            buf: vec![0.0; x.len()],
            success: None,
        })
    }

    pub fn stop_on_success(mut self, on: bool) -> Self {
        self.stop_on_success = on;
        self
    }

    pub fn success(&self) -> Option<&SuccessfulProbe> {
        self.success.as_ref()
    }

    pub fn take_success(&mut self) -> Option<SuccessfulProbe> {
        self.success.take()
    }

    pub fn oracle(&self) -> &AttackObjective<'v, V> {
        self.oracle
    }
}

impl<V: Victim + ?Sized> SetFunction for BlockObjective<'_, '_, V> {
    type Stop = AttackStop;

    fn ground_size(&self) -> usize {
        self.grid.len()
    }

    fn eval(&mut self, set: &ElementSet) -> Result<f64, AttackStop> {
        self.grid
            .assemble_into(self.x, set, self.epsilon, self.clip, &mut self.buf)
            .expect("set and image shapes were checked against the grid");
        let was_fooled = self.oracle.ledger.success;
        let value = self
            .oracle
            .evaluate(&self.buf)
            .map_err(|_| AttackStop::BudgetExhausted)?;
        self.count += 1;
        if self.oracle.ledger.success && !was_fooled {
            self.success = Some(SuccessfulProbe {
                set: set.clone(),
                image: self.buf.clone(),
                value,
            });
            if self.stop_on_success {
                return Err(AttackStop::Succeeded);
            }
        }
        Ok(value)
    }

    fn eval_count(&self) -> u64 {
        self.count
    }
}

/// Builds the block set function for `x` under `oracle`.
pub fn as_set_function<'a, 'v, V: Victim + ?Sized>(
    oracle: &'a mut AttackObjective<'v, V>,
    x: &'a [f64],
    grid: &'a BlockGrid,
    epsilon: f64,
    clip: bool,
) -> Result<BlockObjective<'a, 'v, V>, BlockError> {
    BlockObjective::new(oracle, x, grid, epsilon, clip)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::blocks::{ImageSpec, NoiseCanvas};

    /// Two-class logistic victim: p(class 1) = σ(w·x).
    struct Logistic(Vec<f64>);

    impl Victim for Logistic {
        fn num_classes(&self) -> usize {
            2
        }
        fn input_dim(&self) -> usize {
            self.0.len()
        }
        fn loss_report(&self, x: &[f64], label: usize) -> LossReport {
            let z: f64 = self.0.iter().zip(x).map(|(w, v)| w * v).sum();
            // Loss of class 1 is log(1 + e^{-z}); of class 0, log(1 + e^{z}).
            let loss = if label == 1 {
                (-z).exp().ln_1p()
            } else {
                z.exp().ln_1p()
            };
            LossReport {
                loss,
                predicted: usize::from(z > 0.0),
            }
        }
    }

    #[test]
    fn untargeted_value_matches_closed_form() {
        let v = Logistic(vec![-1.0, -1.0]);
        let mut obj = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 10);
        let f = obj.evaluate(&[1.0, 1.0]).unwrap();
        assert!((f - 2f64.exp().ln_1p()).abs() < 1e-12);
        assert!((f - 2.1269).abs() < 1e-4);
        // w·x = -2 predicts class 0: fooled.
        assert!(obj.ledger().success());
        assert_eq!(obj.ledger().first_success_at(), Some(1));
    }

    #[test]
    fn targeted_success_and_sign() {
        let v = Logistic(vec![1.0, 1.0]);
        let mut obj = AttackObjective::new(&v, AttackMode::Targeted { target: 1 }, 10);
        let f = obj.evaluate(&[0.5, 0.5]).unwrap();
        let loss = v.loss_report(&[0.5, 0.5], 1).loss;
        assert_eq!(f, -loss);
        assert!(obj.ledger().success());

        let mut un = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 10);
        assert_eq!(un.evaluate(&[0.5, 0.5]).unwrap(), -f);
    }

    #[test]
    fn budget_boundary() {
        let v = Logistic(vec![1.0]);
        let mut obj = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 10);
        for _ in 0..10 {
            obj.evaluate(&[1.0]).unwrap();
        }
        assert_eq!(obj.evaluate(&[1.0]), Err(BudgetExhausted { budget: 10 }));
        assert_eq!(obj.ledger().count(), 10);
        assert_eq!(obj.ledger().trajectory().len(), 10);
        assert!(!obj.ledger().success());
    }

    #[test]
    fn success_never_reverts() {
        let v = Logistic(vec![1.0]);
        let mut obj = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 10);
        obj.evaluate(&[1.0]).unwrap();
        obj.evaluate(&[-1.0]).unwrap();
        obj.evaluate(&[1.0]).unwrap();
        assert!(obj.ledger().success());
        assert_eq!(obj.ledger().first_success_at(), Some(2));
    }

    #[test]
    fn block_objective_reproduces_counterexample() {
        // x = (0, 0), eps = 1, one block per coordinate, no clipping.
        let v = Logistic(vec![-1.0, -1.0]);
        let spec = ImageSpec::with_range(1, 2, 1, -10.0, 10.0).unwrap();
        let grid = crate::blocks::BlockGrid::build(spec, NoiseCanvas::new(1, 2).unwrap(), 1).unwrap();
        let x = [0.0, 0.0];
        let mut obj = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 100);
        let mut f = as_set_function(&mut obj, &x, &grid, 1.0, false)
            .unwrap()
            .stop_on_success(false);
        let empty = f.eval(&ElementSet::empty(2)).unwrap();
        let full = f.eval(&ElementSet::full(2)).unwrap();
        let again = f.eval(&ElementSet::empty(2)).unwrap();
        assert!((empty - 0.1269).abs() < 1e-4);
        assert!((full - 2.1269).abs() < 1e-4);
        assert_eq!(empty.to_bits(), again.to_bits());
        assert_eq!(f.eval_count(), 3);
        assert_eq!(f.oracle().ledger().count(), 3);
        assert!(f.success().is_some());
    }

    #[test]
    fn block_objective_stops_on_success() {
        let v = Logistic(vec![-1.0, -1.0]);
        let spec = ImageSpec::with_range(1, 2, 1, -10.0, 10.0).unwrap();
        let grid = crate::blocks::BlockGrid::build(spec, NoiseCanvas::new(1, 2).unwrap(), 1).unwrap();
        let x = [0.0, 0.0];
        let mut obj = AttackObjective::new(&v, AttackMode::Untargeted { label: 1 }, 100);
        let mut f = as_set_function(&mut obj, &x, &grid, 1.0, false).unwrap();
        assert!(f.eval(&ElementSet::empty(2)).is_ok());
        assert_eq!(f.eval(&ElementSet::full(2)), Err(AttackStop::Succeeded));
        let hit = f.take_success().unwrap();
        assert_eq!(hit.image, vec![1.0, 1.0]);
    }
}
