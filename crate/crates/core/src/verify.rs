//! Named property suites over seeded random instances. Each returns a report
//! with one line per instance checked.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analysis::instances::{logistic_counterexample, random_modular, random_table, WeightedCoverage};
use crate::analysis::{
    check_appendix_lemmas, check_corollary1, check_index_properties, check_theorem1, is_submodular,
    submodularity_index, SetTable, Verdict,
};
use crate::blocks::{hierarchical_attack, AttackConfig, BlockGrid, ImageSpec, NoiseCanvas};
use crate::models::{fgsm, Classifier, Mlp, SoftmaxRegression};
use crate::oracle::{AttackMode, AttackObjective};
use crate::setfn::{
    is_local_optimum, lazy_greedy_insert, marginal_gain, naive_greedy_insert, naive_local_search, ElementSet, FnSet,
    Incumbent, PhaseTrace, SetFunction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Counterexample,
    GreedyEquivalence,
    LocalOptimum,
    Theorem1,
    Lemmas,
    Smi,
    SplitInvariance,
    LinearFgsm,
    Gradient,
}

impl Suite {
    pub const ALL: [Suite; 9] = [
        Suite::Counterexample,
        Suite::GreedyEquivalence,
        Suite::LocalOptimum,
        Suite::Theorem1,
        Suite::Lemmas,
        Suite::Smi,
        Suite::SplitInvariance,
        Suite::LinearFgsm,
        Suite::Gradient,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Counterexample => "counterexample",
            Suite::GreedyEquivalence => "greedy-equivalence",
            Suite::LocalOptimum => "local-optimum",
            Suite::Theorem1 => "theorem1",
            Suite::Lemmas => "lemmas",
            Suite::Smi => "smi",
            Suite::SplitInvariance => "split-invariance",
            Suite::LinearFgsm => "linear-fgsm",
            Suite::Gradient => "gradient",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|x| x.name() == s)
    }

    pub fn run(self, seed: u64, trials: usize) -> SuiteReport {
        match self {
            Suite::Counterexample => counterexample(),
            Suite::GreedyEquivalence => greedy_equivalence(seed, trials),
            Suite::LocalOptimum => local_optimum(seed, trials),
            Suite::Theorem1 => theorem1(seed, trials),
            Suite::Lemmas => lemmas(seed, trials),
            Suite::Smi => smi(seed, trials),
            Suite::SplitInvariance => split_invariance(seed, trials),
            Suite::LinearFgsm => linear_fgsm(seed, trials),
            Suite::Gradient => gradient(seed, trials),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub header: Vec<String>,
    pub lines: Vec<String>,
    pub checked: usize,
    pub failures: usize,
}

impl SuiteReport {
    fn new(suite: Suite) -> Self {
        Self {
            suite,
            header: Vec::new(),
            lines: Vec::new(),
            checked: 0,
            failures: 0,
        }
    }

    fn record(&mut self, ok: bool, line: String) {
        self.checked += 1;
        if !ok {
            self.failures += 1;
        }
        self.lines.push(format!("{} {line}", if ok { "ok  " } else { "FAIL" }));
    }

    pub fn passed(&self) -> bool {
        self.failures == 0 && self.checked > 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "# suite {}", self.suite.name())?;
        for h in &self.header {
            writeln!(f, "# {h}")?;
        }
        for l in &self.lines {
            writeln!(f, "{l}")?;
        }
        write!(
            f,
            "# {}: {}/{} passed",
            if self.passed() { "PASS" } else { "FAIL" },
            self.checked - self.failures,
            self.checked
        )
    }
}

fn fmt_set(s: &ElementSet) -> String {
    let ids: Vec<String> = s.iter().map(|i| i.to_string()).collect();
    format!("{{{}}}", ids.join(","))
}

// 1-based labels, as the instance is usually written.
fn fmt_set_1(s: &ElementSet) -> String {
    let ids: Vec<String> = s.iter().map(|i| (i + 1).to_string()).collect();
    format!("{{{}}}", ids.join(","))
}

/// The two-pixel logistic instance: gains of element 2 before and after
/// adding element 1, and the diminishing-returns witness.
pub fn counterexample() -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Counterexample);
    r.header
        .push("f(x) = log(1 + exp(-w.x)), w = (-1,-1), x = (0,0), eps = 1; elements numbered from 1".into());
    let mut t = logistic_counterexample();
    let g_empty = marginal_gain(&mut t, &ElementSet::empty(2), 1, None).expect("element 2 is outside the set");
    let g_one = marginal_gain(&mut t, &ElementSet::from_mask(2, 0b01), 1, None).expect("element 2 is outside the set");
    r.record(
        (g_empty - 0.5662).abs() <= 1e-3,
        format!("gain(2 | {{}}) = {g_empty:.4} (expected 0.5662)"),
    );
    r.record(
        (g_one - 1.4338).abs() <= 1e-3,
        format!("gain(2 | {{1}}) = {g_one:.4} (expected 1.4338)"),
    );
    match is_submodular(&t).expect("two elements") {
        Some(w) => {
            let ok = w.a.is_empty() && w.b == ElementSet::from_mask(2, 0b01) && w.element == 1;
            r.record(
                ok,
                format!(
                    "not submodular: witness A={} B={} e={} ({:.4} < {:.4})",
                    fmt_set_1(&w.a),
                    fmt_set_1(&w.b),
                    w.element + 1,
                    w.gain_a,
                    w.gain_b
                ),
            );
        }
        None => r.record(false, "reported submodular".into()),
    }
    let lambda = submodularity_index(&t, t.full(), 2).expect("two elements");
    r.record(
        (lambda + 0.8676).abs() <= 1e-3,
        format!("lambda(V, 2) = {lambda:.4} (expected -0.8676)"),
    );
    r
}

/// Lazy and plain greedy insertion from `∅` on weighted-coverage instances
/// with `4..=10` elements: same output, no more evaluations, and evaluation
/// counts that match the phase trace.
pub fn greedy_equivalence(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::GreedyEquivalence);
    r.header.push(format!("weighted coverage, |V| in [4,10], seed {seed}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let n = rng.gen_range(4..=10);
        let cov = WeightedCoverage::random(n, &mut rng);
        let pool: Vec<usize> = (0..n).collect();

        let mut lazy_f = FnSet::new(n, |s: &ElementSet| cov.value(s.to_mask()));
        let Ok(mut lazy) = Incumbent::evaluate(&mut lazy_f, ElementSet::empty(n));
        let mut lt = PhaseTrace::default();
        let Ok(()) = lazy_greedy_insert(&mut lazy_f, &mut lazy, &pool, &mut lt);

        let mut naive_f = FnSet::new(n, |s: &ElementSet| cov.value(s.to_mask()));
        let Ok(mut naive) = Incumbent::evaluate(&mut naive_f, ElementSet::empty(n));
        let mut nt = PhaseTrace::default();
        let Ok(()) = naive_greedy_insert(&mut naive_f, &mut naive, &pool, &mut nt);

        let same = lazy.set == naive.set;
        let fewer = lazy_f.eval_count() <= naive_f.eval_count();
        let audited = lazy_f.eval_count() == 1 + lt.evals() && naive_f.eval_count() == 1 + nt.evals();
        r.record(
            same && fewer && audited,
            format!(
                "trial {trial}: n={n} lazy={} naive={} evals lazy={} naive={}",
                fmt_set(&lazy.set),
                fmt_set(&naive.set),
                lazy_f.eval_count(),
                naive_f.eval_count()
            ),
        );
    }
    r
}

/// Plain local search to convergence yields a local optimum, on coverage
/// (even trials) and random-table (odd trials) instances.
pub fn local_optimum(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::LocalOptimum);
    r.header
        .push(format!("coverage / random tables, |V| in [2,10], seed {seed}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let n = rng.gen_range(2..=10);
        let (family, mut t) = if trial % 2 == 0 {
            ("coverage", WeightedCoverage::random(n, &mut rng).table())
        } else {
            ("table", random_table(n, &mut rng))
        };
        let Ok(out) = naive_local_search(&mut t, ElementSet::empty(n), true);
        let Ok(ok) = is_local_optimum(&mut t, &out.set);
        r.record(
            ok,
            format!(
                "trial {trial}: {family} n={n} S={} F={:.6}",
                fmt_set(&out.set),
                out.value
            ),
        );
    }
    r
}

fn mixed_instance(rng: &mut ChaCha8Rng, trial: usize, max_n: usize) -> (&'static str, SetTable) {
    let n = rng.gen_range(2..=max_n);
    match trial % 3 {
        0 => ("coverage", WeightedCoverage::random(n, rng).table()),
        1 => ("modular", random_modular(n, rng)),
        _ => ("table", random_table(n, rng)),
    }
}

/// Approximation guarantee (and its corollary) on mixed instances with
/// `|V| ≤ 8`, offset to be non-negative.
pub fn theorem1(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Theorem1);
    r.header.push(format!(
        "coverage / modular / random tables, |V| in [2,8], seed {seed}, tol 1e-9"
    ));
    r.header
        .push("lambda(V,2) minimises over S disjoint from A anywhere in V".into());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let (family, t) = mixed_instance(&mut rng, trial, 8);
        let rep = check_theorem1(&t).expect("within size guard");
        let cor = check_corollary1(&t).expect("within size guard");
        r.record(
            rep.holds && cor != Verdict::Violated,
            format!(
                "trial {trial}: {family} n={} S={} C={} 2F(S)+F(V\\S)={:.6} >= F(C)+xi*lambda={:.6} (xi={}, lambda={:.6}) corollary={cor:?}",
                t.n(),
                fmt_set(&rep.s),
                fmt_set(&rep.c),
                rep.lhs,
                rep.rhs,
                rep.xi,
                rep.lambda
            ),
        );
    }
    r
}

/// Exhaustive supporting inequalities on mixed instances with `|V| ≤ 6`.
pub fn lemmas(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Lemmas);
    r.header
        .push(format!("coverage / modular / random tables, |V| in [2,6], seed {seed}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let (family, t) = mixed_instance(&mut rng, trial, 6);
        let rep = check_appendix_lemmas(&t).expect("within size guard");
        r.record(
            rep.ok(),
            format!(
                "trial {trial}: {family} n={} lemma2 {}/{} lemma3 {}/{} lemma4 {}/{} over {} local optima",
                t.n(),
                rep.lemma2.checked - rep.lemma2.violations,
                rep.lemma2.checked,
                rep.lemma3.checked - rep.lemma3.violations,
                rep.lemma3.checked,
                rep.lemma4.checked - rep.lemma4.violations,
                rep.lemma4.checked,
                rep.local_optima
            ),
        );
    }
    r
}

/// Index monotonicity in `L` and the range bound at the optimum.
pub fn smi(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::Smi);
    r.header
        .push(format!("coverage / modular / random tables, |V| in [2,6], seed {seed}"));
    r.header
        .push("index maximises over S ⊆ V with S ∩ A = ∅, |S| ≤ k (not restricted to L)".into());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let (family, t) = mixed_instance(&mut rng, trial, 6);
        let rep = check_index_properties(&t).expect("within size guard");
        r.record(
            rep.ok(),
            format!(
                "trial {trial}: {family} n={} monotone {}/{} range {}/{} lambda(V,2)={:.6}",
                t.n(),
                rep.monotone.checked - rep.monotone.violations,
                rep.monotone.checked,
                rep.range.checked - rep.range.violations,
                rep.range.checked,
                rep.lambda_full
            ),
        );
    }
    r
}

/// Random grids and working sets: assembling before and after a split gives
/// bitwise-identical images.
pub fn split_invariance(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::SplitInvariance);
    r.header
        .push(format!("random canvases, block sizes 2..16, seed {seed}"));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let k = 1usize << rng.gen_range(1..=4);
        let ch = k * rng.gen_range(1..=4);
        let cw = k * rng.gen_range(1..=4);
        let channels = rng.gen_range(1..=3);
        let spec = ImageSpec::new(rng.gen_range(1..=40), rng.gen_range(1..=40), channels).expect("positive dims");
        let canvas = NoiseCanvas::new(ch, cw).expect("positive dims");
        let mut grid = BlockGrid::build(spec, canvas, k).expect("k divides the canvas");
        let ids: Vec<usize> = (0..grid.len()).filter(|_| rng.gen_bool(0.5)).collect();
        grid.working = ElementSet::from_ids(grid.len(), ids).expect("ids in range");
        let x: Vec<f64> = (0..spec.len()).map(|_| rng.gen::<f64>()).collect();
        let eps = rng.gen_range(0.01..0.5);
        let clip = rng.gen_bool(0.5);
        let before = grid.assemble(&x, &grid.working, eps, clip).expect("shapes agree");
        let child = grid.split().expect("k >= 2");
        let after = child.assemble(&x, &child.working, eps, clip).expect("shapes agree");
        let same = before.iter().zip(&after).all(|(a, b)| a.to_bits() == b.to_bits());
        r.record(
            same,
            format!(
                "trial {trial}: canvas {ch}x{cw}x{channels} k={k} image {}x{} |S|={} clip={clip}",
                spec.height,
                spec.width,
                grid.working.len()
            ),
        );
    }
    r
}

/// On a linear two-class victim every block's gain has a fixed sign, so the
/// search at block size 1 must land exactly on the FGSM vertex.
pub fn linear_fgsm(seed: u64, trials: usize) -> SuiteReport {
    let mut r = SuiteReport::new(Suite::LinearFgsm);
    r.header.push(format!(
        "binary logistic victims, initial block size 1..4, no clipping, seed {seed}"
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let initial_k = 1usize << rng.gen_range(0..=2);
        let side = |rng: &mut ChaCha8Rng| 4 * rng.gen_range(1..=2);
        let spec = ImageSpec::new(side(&mut rng), side(&mut rng), rng.gen_range(1..=3)).expect("positive dims");
        let d = spec.len();
        // Keep |w_i| away from zero so no gain vanishes.
        let w: Vec<f64> = (0..d)
            .map(|_| {
                let m = rng.gen_range(0.05..1.0);
                if rng.gen_bool(0.5) {
                    m
                } else {
                    -m
                }
            })
            .collect();
        let w: Vec<f64> = w.iter().map(|v| v / (d as f64).sqrt()).collect();
        let model = SoftmaxRegression::binary_logistic(&w);
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let label = rng.gen_range(0..2);
        let mode = if rng.gen_bool(0.5) {
            AttackMode::Untargeted { label }
        } else {
            AttackMode::Targeted { target: label }
        };
        let epsilon = rng.gen_range(0.01..0.3);
        let cfg = AttackConfig {
            epsilon,
            initial_k,
            batch_size: 64,
            max_queries: 1_000_000,
            max_rounds: 16,
            clip: false,
            stop_on_success: false,
        };
        let mut oracle = AttackObjective::new(&model, mode, cfg.max_queries);
        let res = hierarchical_attack(&mut oracle, &x, spec, &cfg).expect("valid configuration");
        let x_fgsm = fgsm(&model, &x, mode, epsilon, None).expect("shapes agree");
        let f_fgsm = oracle.evaluate(&x_fgsm).expect("budget left");
        let f_attack = res.final_value.unwrap_or(f64::NAN);
        let same_vertex = res
            .adversarial
            .iter()
            .zip(&x_fgsm)
            .zip(&x)
            .all(|((a, b), x0)| (a - x0).signum() == (b - x0).signum());
        let ok = same_vertex && res.final_block_size == 1 && (f_attack - f_fgsm).abs() <= 1e-9;
        r.record(
            ok,
            format!(
                "trial {trial}: d={d} k0={initial_k} eps={epsilon:.3} F={f_attack:.12} f(fgsm)={f_fgsm:.12} same vertex={same_vertex} queries={}",
                res.queries
            ),
        );
    }
    r
}

/// Analytic input gradients against central finite differences (step 1e-4)
/// on small random softmax and ReLU models.
pub fn gradient(seed: u64, trials: usize) -> SuiteReport {
    const STEP: f64 = 1e-4;
    const TOL: f64 = 1e-5;
    let mut r = SuiteReport::new(Suite::Gradient);
    r.header.push(format!(
        "central differences, step {STEP}, norm-relative tolerance {TOL}, seed {seed}"
    ));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for trial in 0..trials {
        let inputs = rng.gen_range(2..=12);
        let classes = rng.gen_range(2..=5);
        let model: Box<dyn Classifier> = if trial % 2 == 0 {
            let weights = (0..inputs * classes).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let bias = (0..classes).map(|_| rng.gen_range(-0.5..0.5)).collect();
            Box::new(SoftmaxRegression::new(classes, inputs, weights, bias).expect("consistent shapes"))
        } else {
            Box::new(Mlp::random(inputs, rng.gen_range(2..=8), classes, rng.gen()))
        };
        let x: Vec<f64> = (0..inputs).map(|_| rng.gen::<f64>()).collect();
        let label = rng.gen_range(0..classes);
        let analytic = model.forward_loss(&x, label).expect("shapes agree").gradient;
        let loss = |x: &[f64]| model.forward_loss(x, label).expect("shapes agree").loss;
        let numeric: Vec<f64> = (0..inputs)
            .map(|i| {
                let mut up = x.clone();
                let mut down = x.clone();
                up[i] += STEP;
                down[i] -= STEP;
                (loss(&up) - loss(&down)) / (2.0 * STEP)
            })
            .collect();
        let norm = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        r.record(
            rel <= TOL,
            format!(
                "trial {trial}: {} {inputs}->{classes} relative error {rel:.2e}",
                if trial % 2 == 0 { "softmax" } else { "mlp" }
            ),
        );
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_round_trip() {
        for s in Suite::ALL {
            assert_eq!(Suite::parse(s.name()), Some(s));
        }
        assert_eq!(Suite::parse("nope"), None);
    }

    #[test]
    fn small_runs_pass() {
        for s in Suite::ALL {
            let rep = s.run(3, 6);
            assert!(rep.passed(), "{rep}");
        }
    }

    #[test]
    fn counterexample_report_text() {
        let text = counterexample().to_string();
        assert!(text.contains("0.5662"));
        assert!(text.contains("1.4338"));
        assert!(text.contains("A={} B={1} e=2"));
    }
}
