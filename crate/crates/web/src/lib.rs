//! Browser demo. Three operations: the two-pixel logistic counterexample
//! with adjustable weights, a block attack on a toy classifier replayed round
//! by round, and the block layout at each hierarchy level.
//!
//! Build with `wasm-pack build crates/web --target web --out-dir www/pkg`.

use lazyattack::analysis::{is_submodular, submodularity_index, SetTable};
use lazyattack::blocks::{BlockGrid, Termination};
use lazyattack::models::{gen_synthetic, train_sgd, BlobParams, Classifier, SgdConfig, SoftmaxRegression};
use lazyattack::{hierarchical_attack, AttackConfig, AttackMode, AttackObjective, ImageSpec, NoiseCanvas};
use wasm_bindgen::prelude::*;

/// `F(S) = log(1 + exp(-(w·(x + δ_S))))` on two pixels, `δ_S` = `+ε` on `S`
/// and `−ε` elsewhere (label 1 of a logistic model `σ(w·x)`).
///
/// Returns `[F(∅), F({1}), F({2}), F({1,2}), Δ(2|∅), Δ(2|{1}), λ(V,2),
/// submodular ? 1 : 0]`.
#[wasm_bindgen]
pub fn counterexample(w1: f64, w2: f64, x1: f64, x2: f64, epsilon: f64) -> Vec<f64> {
    let table = SetTable::from_mask_fn(2, |m| {
        let d = |i: u64| if m >> i & 1 == 1 { epsilon } else { -epsilon };
        let z = w1 * (x1 + d(0)) + w2 * (x2 + d(1));
        (-z).exp().ln_1p()
    })
    .expect("two elements");
    let v: Vec<f64> = (0..4).map(|m| table.get(m)).collect();
    let lambda = submodularity_index(&table, table.full(), 2).expect("two elements");
    let submodular = is_submodular(&table).expect("two elements").is_none();
    vec![
        v[0],
        v[1],
        v[2],
        v[3],
        v[2] - v[0],
        v[3] - v[1],
        lambda,
        f64::from(u8::from(submodular)),
    ]
}

/// Block id of every pixel of a one-channel `height × width` image at
/// block size `k`, row-major. Blocks live on the noise canvas, which is
/// resized to the image.
#[wasm_bindgen]
pub fn block_map(height: usize, width: usize, k: usize) -> Result<Vec<u32>, JsError> {
    let spec = ImageSpec::new(height, width, 1)?;
    let grid = BlockGrid::build(spec, NoiseCanvas::for_image(&spec, k)?, k)?;
    Ok(grid.pixel_blocks().iter().map(|&b| b as u32).collect())
}

/// A softmax classifier on synthetic 4-class images, and one test image to
/// attack.
#[wasm_bindgen]
pub struct AttackDemo {
    spec: ImageSpec,
    model: SoftmaxRegression,
    image: Vec<f64>,
    label: usize,
    epsilon: f64,
    initial_k: usize,
    budget: u64,
    targeted: bool,
}

/// Outcome of running the attack for a given number of rounds.
#[wasm_bindgen]
pub struct Snapshot {
    adversarial: Vec<f64>,
    noise_sign: Vec<f64>,
    queries: u64,
    success: bool,
    predicted: usize,
    block_size: usize,
    rounds: usize,
    finished: bool,
    values: Vec<f64>,
}

#[wasm_bindgen]
impl Snapshot {
    /// Adversarial image, channel-major.
    pub fn adversarial(&self) -> Vec<f64> {
        self.adversarial.clone()
    }

    /// `+1` / `−1` per pixel (`0` where the perturbation was clipped away).
    pub fn noise_sign(&self) -> Vec<f64> {
        self.noise_sign.clone()
    }

    pub fn queries(&self) -> u32 {
        u32::try_from(self.queries).unwrap_or(u32::MAX)
    }

    pub fn success(&self) -> bool {
        self.success
    }

    pub fn predicted(&self) -> usize {
        self.predicted
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// The attack stopped by itself (success, budget or convergence).
    pub fn finished(&self) -> bool {
        self.finished
    }

    /// Objective value after every mini-batch.
    pub fn values(&self) -> Vec<f64> {
        self.values.clone()
    }
}

#[wasm_bindgen]
impl AttackDemo {
    /// Trains the victim on 16×16 blobs; `seed` picks data and test image.
    #[wasm_bindgen(constructor)]
    pub fn new(seed: u32, epsilon: f64, initial_k: usize, budget: u32, targeted: bool) -> Result<AttackDemo, JsError> {
        let (seed, budget) = (u64::from(seed), u64::from(budget));
        let spec = ImageSpec::new(16, 16, 1)?;
        let params = BlobParams::default();
        let train = gen_synthetic(4, spec, 400, seed, seed.wrapping_add(1), params)?;
        let test = gen_synthetic(4, spec, 40, seed, seed.wrapping_add(2), params)?;
        let mut model = SoftmaxRegression::zeros(4, spec.len());
        train_sgd(
            &mut model,
            &train,
            SgdConfig {
                seed,
                ..SgdConfig::default()
            },
        )?;
        let i = (0..test.len())
            .find(|&i| model.predict(&test.images[i]) == test.labels[i])
            .ok_or_else(|| JsError::new("the victim misclassifies every test image"))?;
        Ok(AttackDemo {
            spec,
            image: test.images[i].clone(),
            label: test.labels[i],
            model,
            epsilon,
            initial_k,
            budget,
            targeted,
        })
    }

    pub fn width(&self) -> usize {
        self.spec.width
    }

    pub fn height(&self) -> usize {
        self.spec.height
    }

    pub fn image(&self) -> Vec<f64> {
        self.image.clone()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Class the targeted attack aims for.
    pub fn target(&self) -> usize {
        (self.label + 1) % 4
    }

    /// Runs the attack from scratch, capped at `rounds` outer rounds.
    pub fn run(&self, rounds: usize) -> Result<Snapshot, JsError> {
        let mode = if self.targeted {
            AttackMode::Targeted { target: self.target() }
        } else {
            AttackMode::Untargeted { label: self.label }
        };
        let cfg = AttackConfig {
            epsilon: self.epsilon,
            initial_k: self.initial_k,
            max_queries: self.budget,
            max_rounds: rounds,
            ..AttackConfig::default()
        };
        let mut oracle = AttackObjective::new(&self.model, mode, self.budget);
        let res = hierarchical_attack(&mut oracle, &self.image, self.spec, &cfg)?;
        let noise_sign = res
            .adversarial
            .iter()
            .zip(&self.image)
            .map(|(a, x)| {
                if a > x {
                    1.0
                } else if a < x {
                    -1.0
                } else {
                    0.0
                }
            })
            .collect();
        Ok(Snapshot {
            predicted: self.model.predict(&res.adversarial),
            adversarial: res.adversarial,
            noise_sign,
            queries: res.queries,
            success: res.success,
            block_size: res.final_block_size,
            rounds: res.rounds,
            finished: res.termination != Termination::MaxRounds,
            values: res.trajectory.iter().map(|p| p.value).collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counterexample_values() {
        let v = counterexample(-1.0, -1.0, 0.0, 0.0, 1.0);
        assert!((v[4] - 0.5662).abs() < 1e-3);
        assert!((v[5] - 1.4338).abs() < 1e-3);
        assert!((v[6] + 0.8676).abs() < 1e-3);
        assert_eq!(v[7], 0.0);
    }

    #[test]
    fn block_map_levels() {
        let m = block_map(4, 4, 2).unwrap();
        assert_eq!(m, vec![0, 0, 1, 1, 0, 0, 1, 1, 2, 2, 3, 3, 2, 2, 3, 3]);
        assert_eq!(block_map(4, 4, 1).unwrap(), (0..16).collect::<Vec<u32>>());
    }

    #[test]
    fn attack_demo_runs() {
        let demo = AttackDemo::new(3, 0.2, 4, 5000, false).unwrap();
        let first = demo.run(1).unwrap();
        assert!(first.rounds() <= 1);
        let full = demo.run(64).unwrap();
        assert!(full.finished());
        assert!(full.queries() >= first.queries());
        assert_eq!(full.noise_sign().len(), 256);
        if full.success() {
            assert_ne!(full.predicted(), demo.label());
        }
    }
}
