use std::fs;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use lazyattack::models::{gen_synthetic, train_sgd, BlobParams, Classifier, Mlp, Model, SgdConfig, SoftmaxRegression};
use lazyattack::verify::Suite;
use lazyattack::ImageSpec;
use lazyattack_cli::campaign::{run_campaign, summarize, Method};
use lazyattack_cli::config::{CampaignConfig, ModeKind};
use lazyattack_cli::formats::{self, read_records};
use lazyattack_cli::report::{campaign_name, load_histogram, summary_csv, summary_table};
use lazyattack_cli::{load_data, write_campaign};

#[derive(Parser)]
#[command(
    name = "lazyattack",
    version,
    about = "Query-limited black-box attacks by lazy local search"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the hierarchical attack over an image pool.
    Attack(CampaignArgs),
    /// Run a baseline (random-sign, fgsm, pgd) over the same pool.
    Baseline {
        #[arg(long, value_parser = parse_baseline)]
        method: Method,
        #[command(flatten)]
        campaign: CampaignArgs,
    },
    /// Run a property suite; exits nonzero on any failure.
    Verify {
        /// Suite name, or `all`.
        #[arg(long, default_value = "all", value_parser = parse_suites)]
        suite: Suites,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Train a victim on an IDX dataset and write its model file.
    Train(TrainArgs),
    /// Write synthetic train/test splits as IDX files.
    GenData(GenArgs),
    /// Summarise campaign CSVs; optionally histogram one campaign's noise.
    Report(ReportArgs),
}

fn parse_baseline(s: &str) -> Result<Method, String> {
    match s.parse()? {
        Method::Lazy => Err("`lazy` is the attack itself; use the attack subcommand".into()),
        m => Ok(m),
    }
}

#[derive(Clone)]
struct Suites(Vec<Suite>);

fn parse_suites(s: &str) -> Result<Suites, String> {
    if s == "all" {
        return Ok(Suites(Suite::ALL.to_vec()));
    }
    Suite::parse(s).map(|x| Suites(vec![x])).ok_or_else(|| {
        let names: Vec<&str> = Suite::ALL.iter().map(|s| s.name()).collect();
        format!("unknown suite {s:?}; one of all, {}", names.join(", "))
    })
}

/// Flags override the config file, which overrides the defaults.
#[derive(Args)]
struct CampaignArgs {
    /// TOML campaign config.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    model: Option<PathBuf>,
    /// IDX image file (synthetic data from the config when absent).
    #[arg(long, requires = "labels")]
    images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    labels: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ModeKind>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    initial_k: Option<usize>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    max_queries: Option<u64>,
    #[arg(long)]
    max_rounds: Option<usize>,
    #[arg(long)]
    no_clip: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of correctly classified images to attack.
    #[arg(long)]
    count: Option<usize>,
    #[arg(long)]
    pgd_steps: Option<usize>,
    #[arg(long)]
    pgd_step_size: Option<f64>,
    /// Directory for per_image.csv, curve.csv, noise.csv, summary.csv and
    /// the resolved config.
    #[arg(long)]
    out_dir: PathBuf,
}

impl CampaignArgs {
    fn resolve(&self) -> Result<CampaignConfig> {
        let mut cfg = match &self.config {
            Some(p) => CampaignConfig::load(p)?,
            None => CampaignConfig::default(),
        };
        macro_rules! set {
            ($($flag:ident => $field:ident),*) => {
                $(if let Some(v) = self.$flag.clone() { cfg.$field = v; })*
            };
        }
        set!(mode => mode, epsilon => epsilon, initial_k => initial_k, batch_size => batch_size,
             max_queries => max_queries, max_rounds => max_rounds, seed => seed, count => images,
             pgd_steps => pgd_steps);
        if self.model.is_some() {
            cfg.model = self.model.clone();
        }
        if self.images.is_some() {
            cfg.data_images = self.images.clone();
            cfg.data_labels = self.labels.clone();
        }
        if self.pgd_step_size.is_some() {
            cfg.pgd_step_size = self.pgd_step_size;
        }
        if self.no_clip {
            cfg.clip = false;
        }
        cfg.validate()
            .map_err(anyhow::Error::msg)
            .context("invalid campaign configuration")?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    images: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// Held-out split to report accuracy on.
    #[arg(long, requires = "test_labels")]
    test_images: Option<PathBuf>,
    #[arg(long, requires = "test_images")]
    test_labels: Option<PathBuf>,
    /// `softmax` or `mlp`.
    #[arg(long, default_value = "softmax")]
    kind: String,
    #[arg(long, default_value_t = 64)]
    hidden: usize,
    #[arg(long, default_value_t = 10)]
    epochs: usize,
    #[arg(long, default_value_t = 0.1)]
    lr: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 10)]
    classes: usize,
    #[arg(long, default_value_t = 28)]
    height: usize,
    #[arg(long, default_value_t = 28)]
    width: usize,
    #[arg(long, default_value_t = 1)]
    channels: usize,
    #[arg(long, default_value_t = 2000)]
    train: usize,
    #[arg(long, default_value_t = 500)]
    test: usize,
    /// Seeds the class prototypes; splits use `seed+1` and `seed+2`.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ReportArgs {
    /// Per-image campaign CSVs, one summary row each.
    #[arg(required = true)]
    csv: Vec<PathBuf>,
    /// Campaign whose successes define the conditional average column.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// noise.csv of one campaign, for the perturbation histogram.
    #[arg(long)]
    noise: Option<PathBuf>,
    /// Interior histogram bins between −ε and +ε.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Also write summary.csv (and histogram.csv) here.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn campaign(args: &CampaignArgs, method: Method) -> Result<()> {
    let cfg = args.resolve()?;
    let model_path = cfg
        .model
        .clone()
        .context("no model given (--model or `model` in the config)")?;
    let model = formats::load_model(&model_path)?;
    // Synthetic pools draw twice the requested count so misclassified
    // images can be skipped.
    let data = load_data(&cfg.data_source().map_err(anyhow::Error::msg)?, 2 * cfg.images)?;
    let c = run_campaign(&model, &data, &cfg, method)?;
    if c.records.len() < cfg.images {
        eprintln!(
            "warning: only {} correctly classified images available ({} requested)",
            c.records.len(),
            cfg.images
        );
    }
    write_campaign(&args.out_dir, &c)?;
    write(&args.out_dir.join("config.toml"), &cfg.to_toml())?;
    let s = summarize(method.name(), &c.records, None);
    write(
        &args.out_dir.join("summary.csv"),
        &summary_csv(std::slice::from_ref(&s)),
    )?;
    println!(
        "# {} {} eps={} budget={} pool={} skipped={}",
        method.name(),
        cfg.mode.name(),
        cfg.epsilon,
        cfg.max_queries,
        c.records.len(),
        c.skipped
    );
    print!("{}", summary_table(&[s]));
    Ok(())
}

fn train(a: &TrainArgs) -> Result<()> {
    let data = formats::read_dataset(&a.images, &a.labels, None)?;
    let dim = data.spec.len();
    let mut model = match a.kind.as_str() {
        "softmax" => Model::Softmax(SoftmaxRegression::zeros(data.classes, dim)),
        "mlp" => Model::Mlp(Mlp::random(dim, a.hidden, data.classes, a.seed)),
        other => bail!("unknown model kind {other:?} (softmax, mlp)"),
    };
    let cfg = SgdConfig {
        epochs: a.epochs,
        lr: a.lr,
        batch_size: a.batch_size,
        seed: a.seed,
    };
    train_sgd(&mut model, &data, cfg)?;
    println!("train accuracy {:.4}", data.accuracy(&model));
    if let (Some(i), Some(l)) = (&a.test_images, &a.test_labels) {
        let test = formats::read_dataset(i, l, Some(data.classes))?;
        println!("test accuracy {:.4}", test.accuracy(&model));
    }
    formats::save_model(&model, &a.out)?;
    println!("wrote {} ({} layers)", a.out.display(), model.layers().len());
    Ok(())
}

fn gen_data(a: &GenArgs) -> Result<()> {
    let spec = ImageSpec::new(a.height, a.width, a.channels)?;
    fs::create_dir_all(&a.out_dir).with_context(|| format!("creating {}", a.out_dir.display()))?;
    for (split, n, sample_seed) in [
        ("train", a.train, a.seed.wrapping_add(1)),
        ("test", a.test, a.seed.wrapping_add(2)),
    ] {
        let data = gen_synthetic(a.classes, spec, n, a.seed, sample_seed, BlobParams::default())?;
        let images = a.out_dir.join(format!("{split}-images.idx"));
        let labels = a.out_dir.join(format!("{split}-labels.idx"));
        formats::write_dataset(&data, &images, &labels)?;
        println!("wrote {} and {} ({n} images)", images.display(), labels.display());
    }
    Ok(())
}

fn report(a: &ReportArgs) -> Result<()> {
    let reference = a.reference.as_deref().map(read_records).transpose()?;
    let mut rows = Vec::new();
    for p in &a.csv {
        let records = read_records(p)?;
        rows.push(summarize(&campaign_name(p), &records, reference.as_deref()));
    }
    print!("{}", summary_table(&rows));
    let hist = a.noise.as_deref().map(|p| load_histogram(p, a.bins)).transpose()?;
    if let Some(h) = &hist {
        println!(
            "# noise histogram, eps={}, {} coordinates, vertex fraction {:.4}",
            h.epsilon,
            h.total,
            h.vertex_fraction()
        );
        print!("{}", h.to_csv());
    }
    if let Some(dir) = &a.out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        write(&dir.join("summary.csv"), &summary_csv(&rows))?;
        if let Some(h) = &hist {
            write(&dir.join("histogram.csv"), &h.to_csv())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Attack(a) => campaign(a, Method::Lazy),
        Command::Baseline { method, campaign: a } => campaign(a, *method),
        Command::Verify { suite, seed, trials } => {
            let mut failed = false;
            for s in &suite.0 {
                let rep = s.run(*seed, *trials);
                failed |= !rep.passed();
                // A closed pipe (e.g. `| head`) ends the listing, not the run.
                if writeln!(io::stdout().lock(), "{rep}").is_err() {
                    break;
                }
            }
            if failed {
                return ExitCode::FAILURE;
            }
            Ok(())
        }
        Command::Train(a) => train(a),
        Command::GenData(a) => gen_data(a),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
