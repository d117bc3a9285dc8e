use lazyattack::blocks::{BlockGrid, NoiseCanvas};
use lazyattack::models::{
    fgsm, gen_synthetic, pgd, train_sgd, vertex_fraction, BlobParams, Mlp, SgdConfig, SoftmaxRegression,
};
use lazyattack::oracle::BlockObjective;
use lazyattack::setfn::{lazy_greedy_insert, local_search, Incumbent, LocalSearchConfig, PhaseTrace};
use lazyattack::{AttackMode, AttackObjective, ElementSet, ImageSpec};

fn blobs() -> lazyattack::models::LabeledDataset {
    gen_synthetic(3, ImageSpec::new(4, 4, 1).unwrap(), 90, 5, 6, BlobParams::default()).unwrap()
}

#[test]
fn zero_epochs_leave_the_model_unchanged() {
    let data = blobs();
    let mut m = Mlp::random(16, 5, 3, 1);
    let before = m.clone();
    train_sgd(
        &mut m,
        &data,
        SgdConfig {
            epochs: 0,
            ..SgdConfig::default()
        },
    )
    .unwrap();
    assert_eq!(m, before);
}

#[test]
fn training_is_deterministic() {
    let data = blobs();
    let train = || {
        let mut m = Mlp::random(16, 5, 3, 1);
        train_sgd(&mut m, &data, SgdConfig::default()).unwrap();
        m
    };
    assert_eq!(train(), train());
}

#[test]
fn vertex_fractions() {
    let data = blobs();
    let mut m = SoftmaxRegression::zeros(3, 16);
    train_sgd(&mut m, &data, SgdConfig::default()).unwrap();
    let x = &data.images[0];
    let mode = AttackMode::Untargeted { label: data.labels[0] };
    let adv = fgsm(&m, x, mode, 0.07, None).unwrap();
    assert_eq!(vertex_fraction(&adv, x, 0.07, 1e-12), 1.0);
    assert_eq!(vertex_fraction(x, x, 0.07, 1e-12), 0.0);
    // A softmax model's gradient is not constant, but a single class-pair
    // logistic model's is.
    let w: Vec<f64> = (0..16).map(|i| if i % 3 == 0 { -0.5 } else { 0.25 }).collect();
    let lin = SoftmaxRegression::binary_logistic(&w);
    let adv = pgd(&lin, x, AttackMode::Untargeted { label: 1 }, 0.07, 20, 0.01, None).unwrap();
    assert_eq!(vertex_fraction(&adv, x, 0.07, 1e-12), 1.0);
}

#[test]
fn local_search_never_trails_greedy_insertion() {
    let data = blobs();
    let mut m = SoftmaxRegression::zeros(3, 16);
    train_sgd(&mut m, &data, SgdConfig::default()).unwrap();
    let spec = data.spec;
    let grid = BlockGrid::build(spec, NoiseCanvas::for_image(&spec, 1).unwrap(), 1).unwrap();
    for i in 0..20 {
        let x = &data.images[i];
        let mode = AttackMode::Untargeted { label: data.labels[i] };
        let mut oracle = AttackObjective::new(&m, mode, u64::MAX);
        let mut f = BlockObjective::new(&mut oracle, x, &grid, 0.1, true)
            .unwrap()
            .stop_on_success(false);
        let mut greedy = Incumbent::evaluate(&mut f, ElementSet::empty(grid.len())).unwrap();
        let pool: Vec<usize> = (0..grid.len()).collect();
        lazy_greedy_insert(&mut f, &mut greedy, &pool, &mut PhaseTrace::default()).unwrap();
        let ls = local_search(&mut f, ElementSet::empty(grid.len()), LocalSearchConfig::default()).unwrap();
        assert!(ls.value >= greedy.value);
    }
}
