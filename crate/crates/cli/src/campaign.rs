//! Attack campaigns over an image pool: the hierarchical attack and the
//! random-sign, FGSM and PGD baselines, with per-image query audits.

use std::cell::Cell;

use lazyattack::blocks::BlockError;
use lazyattack::models::{fgsm, pgd, Classifier, LabeledDataset, Model, ModelError};
use lazyattack::oracle::LossReport;
use lazyattack::{hierarchical_attack, AttackMode, AttackObjective, Victim};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{CampaignConfig, ModeKind};
use crate::formats::{ImageRecord, QueryKind};

#[derive(Debug, Error)]
pub enum CampaignError {
    #[error("configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Attack(#[from] BlockError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(
        "query accounting broken on image {image_id}: ledger {ledger}, set-function evaluations {evaluations}, \
         victim calls {victim_calls}, budget {budget}"
    )]
    Accounting {
        image_id: usize,
        ledger: u64,
        evaluations: u64,
        victim_calls: u64,
        budget: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Lazy,
    RandomSign,
    Fgsm,
    Pgd,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lazy => "lazy",
            Method::RandomSign => "random-sign",
            Method::Fgsm => "fgsm",
            Method::Pgd => "pgd",
        }
    }

    pub fn query_kind(self) -> QueryKind {
        match self {
            Method::Lazy | Method::RandomSign => QueryKind::Oracle,
            Method::Fgsm | Method::Pgd => QueryKind::Gradient,
        }
    }
}

impl std::str::FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [Method::Lazy, Method::RandomSign, Method::Fgsm, Method::Pgd]
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| format!("unknown method {s:?} (lazy, random-sign, fgsm, pgd)"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Campaign {
    pub method: Method,
    pub mode: ModeKind,
    pub epsilon: f64,
    pub budget: u64,
    /// Sorted by image id.
    pub records: Vec<ImageRecord>,
    /// `x_adv − x` per attacked image, in record order.
    pub noise: Vec<(usize, Vec<f64>)>,
    /// Images scanned but left out because the victim already misclassified
    /// them.
    pub skipped: usize,
}

/// Ids of the first `count` images the model classifies correctly, and the
/// number of misclassified images passed over on the way.
pub fn select_pool<C: Classifier + ?Sized>(model: &C, data: &LabeledDataset, count: usize) -> (Vec<usize>, usize) {
    let mut pool = Vec::with_capacity(count);
    let mut skipped = 0;
    for (i, (x, &y)) in data.images.iter().zip(&data.labels).enumerate() {
        if pool.len() == count {
            break;
        }
        if model.predict(x) == y {
            pool.push(i);
        } else {
            skipped += 1;
        }
    }
    (pool, skipped)
}

// Decorrelates per-image streams drawn from one campaign seed.
fn image_rng(seed: u64, image_id: usize, salt: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt);
    rng.set_stream(image_id as u64);
    rng
}

/// Target class for `image_id`: uniform over the other classes.
pub fn target_for(seed: u64, image_id: usize, label: usize, classes: usize) -> usize {
    let t = image_rng(seed, image_id, 0x7461_7267).gen_range(0..classes - 1);
    if t >= label {
        t + 1
    } else {
        t
    }
}

/// Counts loss queries independently of the oracle's ledger.
struct Counting<'m, V: ?Sized> {
    inner: &'m V,
    calls: Cell<u64>,
}

impl<'m, V: Victim + ?Sized> Counting<'m, V> {
    fn new(inner: &'m V) -> Self {
        Self {
            inner,
            calls: Cell::new(0),
        }
    }
}

impl<V: Victim + ?Sized> Victim for Counting<'_, V> {
    fn num_classes(&self) -> usize {
        self.inner.num_classes()
    }

    fn input_dim(&self) -> usize {
        self.inner.input_dim()
    }

    fn loss_report(&self, x: &[f64], label: usize) -> LossReport {
        self.calls.set(self.calls.get() + 1);
        self.inner.loss_report(x, label)
    }
}

fn audit(image_id: usize, ledger: u64, evaluations: u64, victim_calls: u64, budget: u64) -> Result<(), CampaignError> {
    if ledger == evaluations && ledger == victim_calls && ledger <= budget {
        Ok(())
    } else {
        Err(CampaignError::Accounting {
            image_id,
            ledger,
            evaluations,
            victim_calls,
            budget,
        })
    }
}

struct ImageOutcome {
    record: ImageRecord,
    delta: Vec<f64>,
}

/// Runs `method` on the first `cfg.images` correctly classified images,
/// one attack per rayon task. Results do not depend on the thread count.
pub fn run_campaign(
    model: &Model,
    data: &LabeledDataset,
    cfg: &CampaignConfig,
    method: Method,
) -> Result<Campaign, CampaignError> {
    cfg.validate().map_err(CampaignError::Config)?;
    if data.spec.len() != Classifier::input_dim(model) {
        return Err(CampaignError::Config(format!(
            "images have {} values but the model expects {}",
            data.spec.len(),
            Classifier::input_dim(model)
        )));
    }
    if cfg.mode == ModeKind::Targeted && data.classes < 2 {
        return Err(CampaignError::Config(
            "targeted attacks need two or more classes".into(),
        ));
    }
    let (pool, skipped) = select_pool(model, data, cfg.images);
    let mut outcomes = pool
        .par_iter()
        .map(|&id| attack_one(model, data, cfg, method, id))
        .collect::<Result<Vec<_>, _>>()?;
    outcomes.sort_by_key(|o| o.record.image_id);
    let (records, noise) = outcomes
        .into_iter()
        .map(|o| {
            let id = o.record.image_id;
            (o.record, (id, o.delta))
        })
        .unzip();
    Ok(Campaign {
        method,
        mode: cfg.mode,
        epsilon: cfg.epsilon,
        budget: cfg.max_queries,
        records,
        noise,
        skipped,
    })
}

fn attack_one(
    model: &Model,
    data: &LabeledDataset,
    cfg: &CampaignConfig,
    method: Method,
    id: usize,
) -> Result<ImageOutcome, CampaignError> {
    let x = &data.images[id];
    let label = data.labels[id];
    let (mode, target) = match cfg.mode {
        ModeKind::Untargeted => (AttackMode::Untargeted { label }, None),
        ModeKind::Targeted => {
            let t = target_for(cfg.seed, id, label, data.classes);
            (AttackMode::Targeted { target: t }, Some(t))
        }
    };
    let range = cfg.clip.then_some((data.spec.lo, data.spec.hi));
    let (success, queries, final_f, adv) = match method {
        Method::Lazy => {
            let victim = Counting::new(model);
            let mut oracle = AttackObjective::new(&victim, mode, cfg.max_queries);
            let res = hierarchical_attack(&mut oracle, x, data.spec, &cfg.attack_config())?;
            audit(id, res.queries, res.evaluations, victim.calls.get(), cfg.max_queries)?;
            (res.success, res.queries, res.final_value, res.adversarial)
        }
        Method::RandomSign => {
            let victim = Counting::new(model);
            let mut oracle = AttackObjective::new(&victim, mode, cfg.max_queries);
            let mut rng = image_rng(cfg.seed, id, 0x7369_676e);
            let mut best: Option<(f64, Vec<f64>)> = None;
            let mut evaluations = 0;
            while oracle.ledger().remaining() > 0 && !oracle.ledger().success() {
                let probe: Vec<f64> = x
                    .iter()
                    .map(|v| {
                        let p = if rng.gen_bool(0.5) {
                            v + cfg.epsilon
                        } else {
                            v - cfg.epsilon
                        };
                        range.map_or(p, |(lo, hi)| p.clamp(lo, hi))
                    })
                    .collect();
                evaluations += 1;
                let value = oracle.evaluate(&probe).expect("budget checked above");
                // The successful probe is always kept; otherwise the best so far.
                if oracle.ledger().success() || best.as_ref().is_none_or(|(b, _)| value > *b) {
                    best = Some((value, probe));
                }
            }
            let queries = oracle.ledger().count();
            audit(id, queries, evaluations, victim.calls.get(), cfg.max_queries)?;
            let (final_f, adv) = match best {
                Some((v, img)) => (Some(v), img),
                None => (None, x.clone()),
            };
            (oracle.ledger().success(), queries, final_f, adv)
        }
        Method::Fgsm | Method::Pgd => {
            let adv = if method == Method::Fgsm {
                fgsm(model, x, mode, cfg.epsilon, range)?
            } else {
                pgd(model, x, mode, cfg.epsilon, cfg.pgd_steps, cfg.pgd_step(), range)?
            };
            let steps = if method == Method::Fgsm {
                1
            } else {
                cfg.pgd_steps as u64
            };
            let predicted = model.predict(&adv);
            let (success, value) = match mode {
                AttackMode::Untargeted { label } => (predicted != label, model.forward_loss(&adv, label)?.loss),
                AttackMode::Targeted { target } => (predicted == target, -model.forward_loss(&adv, target)?.loss),
            };
            (success, steps, Some(value), adv)
        }
    };
    let delta = adv.iter().zip(x).map(|(a, b)| a - b).collect();
    Ok(ImageOutcome {
        record: ImageRecord {
            image_id: id,
            label,
            target,
            success,
            queries,
            query_kind: method.query_kind(),
            final_f,
        },
        delta,
    })
}

/// Table-style summary of one campaign. Query statistics are over
/// successful images only.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignSummary {
    pub name: String,
    pub images: usize,
    pub successes: usize,
    pub failures: usize,
    pub success_rate: f64,
    pub avg_queries: Option<f64>,
    pub median_queries: Option<f64>,
    /// Average over images that both this campaign and the reference fooled.
    pub avg_queries_on_reference_success: Option<f64>,
    pub query_kind: QueryKind,
}

fn median(sorted: &[u64]) -> Option<f64> {
    let n = sorted.len();
    match n {
        0 => None,
        _ if n % 2 == 1 => Some(sorted[n / 2] as f64),
        _ => Some((sorted[n / 2 - 1] + sorted[n / 2]) as f64 / 2.0),
    }
}

fn mean(v: &[u64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<u64>() as f64 / v.len() as f64)
}

pub fn summarize(name: &str, records: &[ImageRecord], reference: Option<&[ImageRecord]>) -> CampaignSummary {
    let mut q: Vec<u64> = records.iter().filter(|r| r.success).map(|r| r.queries).collect();
    q.sort_unstable();
    let successes = q.len();
    let on_reference = reference.map(|reference| {
        let fooled: std::collections::BTreeSet<usize> =
            reference.iter().filter(|r| r.success).map(|r| r.image_id).collect();
        records
            .iter()
            .filter(|r| r.success && fooled.contains(&r.image_id))
            .map(|r| r.queries)
            .collect::<Vec<_>>()
    });
    CampaignSummary {
        name: name.into(),
        images: records.len(),
        successes,
        failures: records.len() - successes,
        success_rate: if records.is_empty() {
            0.0
        } else {
            successes as f64 / records.len() as f64
        },
        avg_queries: mean(&q),
        median_queries: median(&q),
        avg_queries_on_reference_success: on_reference.as_deref().and_then(mean),
        query_kind: records.first().map_or(QueryKind::Oracle, |r| r.query_kind),
    }
}

/// Fraction of the pool fooled within each query count at which some image
/// was fooled.
pub fn success_curve(records: &[ImageRecord]) -> Vec<(u64, f64)> {
    if records.is_empty() {
        return Vec::new();
    }
    let mut q: Vec<u64> = records.iter().filter(|r| r.success).map(|r| r.queries).collect();
    q.sort_unstable();
    let n = records.len() as f64;
    let mut curve: Vec<(u64, f64)> = Vec::new();
    for (i, &queries) in q.iter().enumerate() {
        let rate = (i + 1) as f64 / n;
        match curve.last_mut() {
            Some(last) if last.0 == queries => last.1 = rate,
            _ => curve.push((queries, rate)),
        }
    }
    curve
}

#[cfg(test)]
mod tests {
    use super::*;
    use lazyattack::models::{gen_synthetic, train_sgd, BlobParams, SgdConfig, SoftmaxRegression};
    use lazyattack::ImageSpec;

    fn setup() -> (Model, LabeledDataset) {
        let spec = ImageSpec::new(8, 8, 1).unwrap();
        let train = gen_synthetic(3, spec, 300, 4, 1, BlobParams::default()).unwrap();
        let test = gen_synthetic(3, spec, 30, 4, 2, BlobParams::default()).unwrap();
        let mut m = SoftmaxRegression::zeros(3, spec.len());
        train_sgd(&mut m, &train, SgdConfig::default()).unwrap();
        (Model::Softmax(m), test)
    }

    fn rec(id: usize, success: bool, queries: u64) -> ImageRecord {
        ImageRecord {
            image_id: id,
            label: 0,
            target: None,
            success,
            queries,
            query_kind: QueryKind::Oracle,
            final_f: None,
        }
    }

    #[test]
    fn targets_avoid_the_label_and_cover_the_rest() {
        let mut seen = [false; 5];
        for id in 0..200 {
            let t = target_for(9, id, 2, 5);
            assert_ne!(t, 2);
            seen[t] = true;
            assert_eq!(t, target_for(9, id, 2, 5));
        }
        assert_eq!(seen, [true, true, false, true, true]);
    }

    #[test]
    fn summary_statistics() {
        let records = [
            rec(0, true, 5),
            rec(1, false, 100),
            rec(2, true, 1),
            rec(3, true, 9),
            rec(4, true, 2),
        ];
        let reference = [rec(0, true, 1), rec(2, false, 1), rec(3, true, 1)];
        let s = summarize("x", &records, Some(&reference));
        assert_eq!((s.images, s.successes, s.failures), (5, 4, 1));
        assert_eq!(s.success_rate, 0.8);
        assert_eq!(s.avg_queries, Some(4.25));
        assert_eq!(s.median_queries, Some(3.5));
        assert_eq!(s.avg_queries_on_reference_success, Some(7.0));
        let curve = success_curve(&records);
        assert_eq!(curve, vec![(1, 0.2), (2, 0.4), (5, 0.6), (9, 0.8)]);
        let none = summarize("y", &[rec(0, false, 3)], None);
        assert_eq!(none.median_queries, None);
        assert_eq!(none.avg_queries_on_reference_success, None);
    }

    #[test]
    fn pool_excludes_misclassified_images() {
        let (model, data) = setup();
        let (pool, skipped) = select_pool(&model, &data, data.len());
        assert_eq!(pool.len() + skipped, data.len());
        for &i in &pool {
            assert_eq!(model.predict(&data.images[i]), data.labels[i]);
        }
    }

    #[test]
    fn budget_one_and_zero() {
        let (model, data) = setup();
        for method in [Method::Lazy, Method::RandomSign] {
            let cfg = CampaignConfig {
                max_queries: 1,
                epsilon: 0.2,
                images: 10,
                ..CampaignConfig::default()
            };
            let c = run_campaign(&model, &data, &cfg, method).unwrap();
            assert!(c
                .records
                .iter()
                .all(|r| r.queries <= 1 && (!r.success || r.queries == 1)));
            let cfg = CampaignConfig { max_queries: 0, ..cfg };
            let c = run_campaign(&model, &data, &cfg, method).unwrap();
            assert_eq!(summarize("z", &c.records, None).success_rate, 0.0);
            assert!(c.records.iter().all(|r| r.queries == 0));
        }
    }

    #[test]
    fn white_box_rows() {
        let (model, data) = setup();
        let cfg = CampaignConfig {
            epsilon: 0.2,
            images: 10,
            pgd_steps: 7,
            mode: ModeKind::Targeted,
            ..CampaignConfig::default()
        };
        let c = run_campaign(&model, &data, &cfg, Method::Pgd).unwrap();
        assert!(c
            .records
            .iter()
            .all(|r| r.queries == 7 && r.query_kind == QueryKind::Gradient));
        assert!(c.records.iter().all(|r| r.target.is_some_and(|t| t != r.label)));
        let c = run_campaign(&model, &data, &cfg, Method::Fgsm).unwrap();
        assert!(c.records.iter().all(|r| r.queries == 1));
    }

    #[test]
    fn pgd_covers_fgsm_on_a_linear_victim() {
        let spec = ImageSpec::new(4, 4, 1).unwrap();
        let w: Vec<f64> = (0..16).map(|i| if i % 3 == 0 { -0.8 } else { 0.5 }).collect();
        let model = Model::Softmax(SoftmaxRegression::binary_logistic(&w));
        let data = gen_synthetic(2, spec, 60, 3, 4, BlobParams::default()).unwrap();
        // Relabel by the model so every image enters the pool.
        let labels = data.images.iter().map(|x| model.predict(x)).collect();
        let data = LabeledDataset::new(spec, 2, data.images, labels).unwrap();
        let cfg = CampaignConfig {
            epsilon: 0.15,
            images: 60,
            clip: false,
            ..CampaignConfig::default()
        };
        let f = run_campaign(&model, &data, &cfg, Method::Fgsm).unwrap();
        let p = run_campaign(&model, &data, &cfg, Method::Pgd).unwrap();
        assert!(f.records.iter().any(|r| r.success));
        for (a, b) in f.records.iter().zip(&p.records) {
            assert!(!a.success || b.success, "image {}", a.image_id);
        }
    }

    #[test]
    fn thread_count_does_not_matter() {
        let (model, data) = setup();
        let cfg = CampaignConfig {
            epsilon: 0.1,
            images: 12,
            max_queries: 300,
            ..CampaignConfig::default()
        };
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = one.install(|| run_campaign(&model, &data, &cfg, Method::Lazy).unwrap());
        let parallel = run_campaign(&model, &data, &cfg, Method::Lazy).unwrap();
        assert_eq!(serial, parallel);
    }
}
