use crate::oracle::{AttackObjective, AttackStop, BlockObjective, Victim};
use crate::setfn::{lazy_greedy_delete, lazy_greedy_insert, ElementSet, Incumbent, PhaseTrace, SetFunction};

use super::{partition_minibatches, BlockError, BlockGrid, ImageSpec, NoiseCanvas};

#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    /// ℓ∞ radius in image-value units.
    pub epsilon: f64,
    /// Starting block side; a power of two.
    pub initial_k: usize,
    pub batch_size: usize,
    pub max_queries: u64,
    /// Cap on outer rounds (one pass over all mini-batches, then a split).
    pub max_rounds: usize,
    pub clip: bool,
    /// End the attack at the first query that fools the victim.
    pub stop_on_success: bool,
}

impl Default for AttackConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            initial_k: 4,
            batch_size: 64,
            max_queries: 10_000,
            max_rounds: 64,
            clip: true,
            stop_on_success: true,
        }
    }
}

impl AttackConfig {
    pub fn validate(&self) -> Result<(), BlockError> {
        if self.epsilon <= 0.0 || !self.epsilon.is_finite() {
            return Err(BlockError::Config(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.initial_k == 0 || !self.initial_k.is_power_of_two() {
            return Err(BlockError::Config(format!(
                "initial block size {} is not a power of two",
                self.initial_k
            )));
        }
        if self.batch_size == 0 {
            return Err(BlockError::Config("batch size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Success,
    BudgetExhausted,
    /// A full pass at block size 1 accepted no move.
    Converged,
    MaxRounds,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryPoint {
    pub queries: u64,
    pub block_size: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackResult {
    pub success: bool,
    pub termination: Termination,
    pub queries: u64,
    /// Set-function evaluations made by the search; equals `queries`.
    pub evaluations: u64,
    /// Working set at the final granularity (the successful probe's set on
    /// success).
    pub final_set: ElementSet,
    pub final_block_size: usize,
    /// Objective value of `adversarial`, when it was ever evaluated.
    pub final_value: Option<f64>,
    pub adversarial: Vec<f64>,
    /// Incumbent value after the initial query and after every mini-batch.
    pub trajectory: Vec<TrajectoryPoint>,
    pub rounds: usize,
}

/// Hierarchical lazy local search.
///
/// Starting from the empty working set on `initial_k` blocks, each round runs
/// lazy insertion then lazy deletion on every mini-batch of the ground set in
/// order, then halves the block size while it exceeds 1. The oracle's budget
/// is capped at `cfg.max_queries`. Stops on success, budget exhaustion, a
/// pass at block size 1 that changes nothing, or `cfg.max_rounds`.
pub fn hierarchical_attack<V: Victim + ?Sized>(
    oracle: &mut AttackObjective<'_, V>,
    x: &[f64],
    spec: ImageSpec,
    cfg: &AttackConfig,
) -> Result<AttackResult, BlockError> {
    cfg.validate()?;
    spec.check(x)?;
    oracle.ledger_mut().cap_budget(cfg.max_queries);
    let canvas = NoiseCanvas::for_image(&spec, cfg.initial_k)?;
    let mut grid = BlockGrid::build(spec, canvas, cfg.initial_k)?;

    let mut trajectory = Vec::new();
    let mut rounds = 0;
    let mut evaluations = 0;
    let mut incumbent: Option<Incumbent> = None;
    let outcome = 'search: loop {
        let mut f = BlockObjective::new(oracle, x, &grid, cfg.epsilon, cfg.clip)?.stop_on_success(cfg.stop_on_success);
        let mut inc = match incumbent.take() {
            Some(inc) => inc,
            None => match Incumbent::evaluate(&mut f, grid.working.clone()) {
                Ok(inc) => {
                    trajectory.push(TrajectoryPoint {
                        queries: f.oracle().ledger().count(),
                        block_size: grid.block_size(),
                        value: inc.value,
                    });
                    inc
                }
                Err(stop) => {
                    evaluations += f.eval_count();
                    break 'search (Outcome::Stopped(stop), None, f.take_success());
                }
            },
        };
        if rounds == cfg.max_rounds {
            evaluations += f.eval_count();
            break 'search (Outcome::Finished(Termination::MaxRounds), Some(inc), None);
        }
        rounds += 1;

        let mut changed = false;
        for batch in partition_minibatches(grid.len(), cfg.batch_size) {
            let pool: Vec<usize> = batch.collect();
            let mut trace = PhaseTrace::default();
            let step = lazy_greedy_insert(&mut f, &mut inc, &pool, &mut trace)
                .and_then(|()| lazy_greedy_delete(&mut f, &mut inc, &pool, &mut trace));
            changed |= trace.changed();
            if let Err(stop) = step {
                evaluations += f.eval_count();
                break 'search (Outcome::Stopped(stop), Some(inc), f.take_success());
            }
            trajectory.push(TrajectoryPoint {
                queries: f.oracle().ledger().count(),
                block_size: grid.block_size(),
                value: inc.value,
            });
        }
        evaluations += f.eval_count();
        drop(f);

        if grid.block_size() > 1 {
            let child = grid.split()?;
            inc.set = grid.split_set(&child, &inc.set);
            grid = child;
        } else if !changed {
            break 'search (Outcome::Finished(Termination::Converged), Some(inc), None);
        }
        grid.working = inc.set.clone();
        incumbent = Some(inc);
    };

    let (stop, inc, hit) = outcome;
    let termination = match stop {
        Outcome::Stopped(AttackStop::Succeeded) => Termination::Success,
        Outcome::Stopped(AttackStop::BudgetExhausted) => Termination::BudgetExhausted,
        Outcome::Finished(t) => t,
    };
    let (final_set, final_value, adversarial) = match (hit, inc) {
        (Some(hit), _) if termination == Termination::Success => (hit.set, Some(hit.value), hit.image),
        (_, Some(inc)) => {
            let image = grid.assemble(x, &inc.set, cfg.epsilon, cfg.clip)?;
            (inc.set, Some(inc.value), image)
        }
        (_, None) => {
            let set = grid.working.clone();
            let image = grid.assemble(x, &set, cfg.epsilon, cfg.clip)?;
            (set, None, image)
        }
    };
    Ok(AttackResult {
        success: oracle.ledger().success(),
        termination,
        queries: oracle.ledger().count(),
        evaluations,
        final_set,
        final_block_size: grid.block_size(),
        final_value,
        adversarial,
        trajectory,
        rounds,
    })
}

enum Outcome {
    Stopped(AttackStop),
    Finished(Termination),
}
