use std::path::PathBuf;
use std::process::ExitCode;

use clap::{ArgGroup, Args, Parser, Subcommand};
use granlab::data::{
    apply_grouping, generate_circles, redundancy_of, CircleSpec, DatasetBundle, GroupingSpec,
    SourceRegistry, SplitKind,
};
use granlab::harness::{
    persist, read_csv, run_comparison, split_bundle, sweep, ExperimentSpec, Registries, RunPoint,
    TrainSource, DATA_DIR_ENV,
};
use granlab::losses::LossKind;
use granlab::nn::{match_capacity, Activation, TrainConfig};
use granlab::{Error, Result};

mod plot;

#[derive(Parser)]
#[command(
    name = "granlab",
    version,
    about = "Fine- versus coarse-grained training experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a dataset document from the circles generator or a benchmark.
    Generate(GenerateArgs),
    /// Train one fine and one coarse model on the same subsample.
    Run(RunArgs),
    /// Run a sweep described by a spec document.
    Sweep(SweepArgs),
    /// Render a sweep CSV as an SVG chart.
    Plot(PlotArgs),
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["circles", "dataset"])))]
struct GenerateArgs {
    /// Number of concentric circles (and fine classes).
    #[arg(long, value_name = "K")]
    circles: Option<usize>,
    /// Training points to generate.
    #[arg(
        long,
        value_name = "POINTS",
        requires = "circles",
        default_value_t = 5000
    )]
    n: usize,
    /// Boundary redundancy, at most 1 - 2/K.
    #[arg(long, value_name = "R", requires = "circles", default_value_t = 0.0)]
    rho: f64,
    /// Also generate a test set of this many points.
    #[arg(long, value_name = "POINTS", requires = "circles")]
    test_n: Option<usize>,
    /// Half-width of the radial noise (default 0.02 times the ring spacing).
    #[arg(long, requires = "circles")]
    jitter: Option<f64>,
    /// Benchmark name.
    #[arg(long, value_name = "NAME")]
    dataset: Option<String>,
    /// Grouping preset name or path to a grouping document.
    #[arg(long, value_name = "FILE", requires = "dataset")]
    grouping: Option<String>,
    #[arg(long, env = DATA_DIR_ENV, requires = "dataset")]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Dataset document written by `generate`.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_name = "N")]
    fine_hidden: usize,
    #[arg(long, value_name = "M", conflicts_with = "match_capacity")]
    coarse_hidden: Option<usize>,
    /// Size the coarse model to the fine model's parameter count (the default).
    #[arg(long)]
    match_capacity: bool,
    #[arg(long, value_name = "P")]
    train_size: usize,
    /// Test points drawn from the document's test set or held out of its data.
    #[arg(long, default_value_t = 10_000)]
    test_size: usize,
    #[arg(long, default_value = "sgd")]
    optimizer: String,
    #[arg(long, default_value = "relu")]
    activation: Activation,
    /// Objective of the softmax model: fine, intra, or hybrid:BETA.
    #[arg(long, default_value = "fine")]
    loss: LossKind,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Early-stopping patience in epochs; 0 disables stopping.
    #[arg(long)]
    patience: Option<usize>,
    /// Defaults to a size-dependent rule.
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    spec: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[arg(long)]
    csv: PathBuf,
    #[arg(long, value_enum)]
    style: plot::Style,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    title: Option<String>,
}

fn generate(args: GenerateArgs) -> Result<()> {
    let (bundle, redundancy) = if let Some(k) = args.circles {
        let spec = CircleSpec {
            radial_jitter: args.jitter,
            ..CircleSpec::new(k, args.n, args.rho, args.seed)
        };
        let train = generate_circles(&spec)?;
        let test = args
            .test_n
            .map(|n| {
                generate_circles(&CircleSpec {
                    n_points: n,
                    seed: granlab::seed::derive(args.seed, 1),
                    ..spec.clone()
                })
            })
            .transpose()?;
        let measured = redundancy_of(&train)?;
        let source = serde_json::json!({ "kind": "circles", "spec": spec, "test_n": args.test_n });
        (DatasetBundle::new(source, train, test), Some(measured))
    } else {
        let name = args.dataset.expect("clap enforces a source");
        let grouping = args
            .grouping
            .ok_or_else(|| Error::config("--dataset needs --grouping"))?;
        let dir = args.data_dir.ok_or_else(|| {
            Error::config(format!("--dataset needs --data-dir or {DATA_DIR_ENV}"))
        })?;
        let spec = GroupingSpec::resolve(&grouping)?;
        let source = SourceRegistry::builtin().get(&name)?;
        let train = apply_grouping(&source.load(&dir, SplitKind::Train)?, &spec)?;
        let test = apply_grouping(&source.load(&dir, SplitKind::Test)?, &spec)?;
        let echo = serde_json::json!({ "kind": "real", "dataset": name, "grouping": spec });
        (DatasetBundle::new(echo, train, Some(test)), None)
    };
    bundle.save(&args.out)?;
    let d = &bundle.train;
    println!(
        "K={} P={} d={} redundancy={}{}",
        d.k(),
        d.len(),
        d.dim(),
        redundancy.map_or("n/a".to_string(), |r| format!("{r:.4}")),
        bundle
            .test
            .as_ref()
            .map_or(String::new(), |t| format!(" test={}", t.len()))
    );
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let registries = Registries::builtin();
    if !registries.optimizers.contains(&args.optimizer) {
        return Err(Error::config(format!(
            "unknown optimizer '{}' (available: {})",
            args.optimizer,
            registries.optimizers.names().collect::<Vec<_>>().join(", ")
        )));
    }
    let bundle = DatasetBundle::load(&args.data)?;
    let prepared = split_bundle(bundle, args.test_size, granlab::seed::derive(args.seed, 11))?;
    let TrainSource::Pool(pool) = &prepared.train else {
        unreachable!("documents always yield a pool")
    };
    let mut train = if args.optimizer == "adam" {
        TrainConfig::adam()
    } else {
        TrainConfig {
            optimizer: args.optimizer.clone(),
            ..TrainConfig::default()
        }
    };
    if let Some(e) = args.max_epochs {
        train.max_epochs = e;
    }
    if let Some(p) = args.patience {
        train.early_stop_patience = p;
    }
    train.batch_size = args
        .batch_size
        .unwrap_or_else(|| granlab::harness::batch_size_for(args.train_size));
    let point = RunPoint {
        train_size: args.train_size,
        fine_hidden: args.fine_hidden,
        coarse_hidden: args
            .coarse_hidden
            .unwrap_or_else(|| match_capacity(args.fine_hidden, pool.dim(), pool.k())),
        activation: args.activation,
        fine_loss: args.loss,
        train,
        stratified: true,
    };
    let record = run_comparison(&registries, pool, &prepared.test, &point, args.seed)?;
    granlab::io::write_json_pretty(
        &args.out.join("run.json"),
        &serde_json::json!({ "point": point, "record": record }),
    )?;
    println!(
        "acc_fine={:.4} acc_coarse={:.4} delta={:+.4} epochs={}/{}",
        record.acc_fine_test,
        record.acc_coarse_test,
        record.delta(),
        record.epochs_fine,
        record.epochs_coarse
    );
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<ExitCode> {
    let spec = ExperimentSpec::load(&args.spec)?;
    let result = sweep(
        &spec,
        &Registries::builtin(),
        &SourceRegistry::builtin(),
        |p| {
            let s = &p.summary;
            let fmt = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
            println!(
                "[{}/{}] {}={}: fine={} coarse={} delta={} ok={} failed={}",
                p.index + 1,
                p.total,
                spec.axis,
                s.axis_value,
                fmt(s.fine.map(|f| f.center())),
                fmt(s.coarse.map(|c| c.center())),
                fmt(s.delta),
                s.replicates,
                s.failures
            );
            for r in &p.result.replicates {
                if let granlab::harness::ReplicateOutcome::Failed { seed, error } = r {
                    eprintln!("  replicate {seed} failed: {error}");
                }
            }
        },
    )?;
    persist(&args.out, &result)?;
    println!(
        "wrote {} and {}",
        args.out.join("sweep.csv").display(),
        args.out.join("sweep.json").display()
    );
    if result.has_empty_point() {
        eprintln!("error: every replicate failed at one or more points");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn run_plot(args: PlotArgs) -> Result<()> {
    let table = read_csv(&args.csv)?;
    let title = args.title.unwrap_or_else(|| match args.style {
        plot::Style::AccuracyVsSize => "Coarse accuracy".to_string(),
        plot::Style::DeltaVsAxis => "Fine minus coarse accuracy".to_string(),
    });
    let spec = plot::plot_spec(&table, args.style, &title);
    granlab::io::write_text(&args.out, &plot::render_svg(&spec)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(a) => generate(a).map(|_| ExitCode::SUCCESS),
        Command::Run(a) => run(a).map(|_| ExitCode::SUCCESS),
        Command::Sweep(a) => run_sweep(a),
        Command::Plot(a) => run_plot(a).map(|_| ExitCode::SUCCESS),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
