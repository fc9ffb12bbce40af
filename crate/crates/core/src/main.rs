use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use spherepose::equivariant::FilterMode;
use spherepose::evalviz::{self, mollweide, EvalReport, MetricSummary};
use spherepose::grids::{so3_grid_cached, SO3Grid};
use spherepose::harmonics::fault;
use spherepose::selftest;
use spherepose::symsol::{generate, Dataset, RenderConfig, Shape, Split};
use spherepose::trainer::{
    self, read_checkpoint, Checkpoint, Model, ModelConfig, OptimizerKind, ProjectionKind, TrainConfig,
};
use spherepose::{Error, Result};

const OUT_DIR_ENV: &str = "SPHEREPOSE_OUT_DIR";
const CACHE_DIR_ENV: &str = "SPHEREPOSE_CACHE_DIR";

#[derive(Parser, Debug)]
#[command(name = "spherepose", version, about = "Pose distributions over SO(3) from images")]
struct Cli {
    /// Worker threads for batch parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Render a synthetic symmetric-solid dataset.
    Generate(GenerateArgs),
    /// Train a model on a dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint on test datasets and write a JSON report.
    Eval(EvalArgs),
    /// Plot the predicted distribution for one test sample as SVG.
    Viz(VizArgs),
    /// Run the fast invariant suite.
    Selftest(SelftestArgs),
}

#[derive(Args, Debug)]
struct GenerateArgs {
    /// Shape name (tet, cube, ico, cone, cyl, tetX, cylO, sphX).
    #[arg(long)]
    shape: String,
    /// Number of samples.
    #[arg(long)]
    n: usize,
    /// Base seed; every sample draws from its own derived stream.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// train or test
    #[arg(long, default_value = "train")]
    split: String,
    /// Output file (default: <shape>_<split>.syml).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct TrainArgs {
    /// Training-split dataset file.
    #[arg(long)]
    data: PathBuf,
    /// JSON file with `model` and `train` sections; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for checkpoints and the metrics log.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Maximum harmonic degree.
    #[arg(long = "L")]
    lmax: Option<usize>,
    /// spatial or fourier
    #[arg(long)]
    projection: Option<ProjectionKind>,
    /// fourier or spatial
    #[arg(long)]
    s2_filter: Option<FilterMode>,
    /// SO(3) convolutions after the S² convolution (0, 1 or 2).
    #[arg(long)]
    n_so3_convs: Option<usize>,
    /// Channels of the S² convolution output.
    #[arg(long)]
    channels: Option<usize>,
    /// Recursion of the training output grid.
    #[arg(long)]
    grid_recursion: Option<u32>,
    /// SO(3) filter support radius in degrees.
    #[arg(long)]
    support_angle: Option<f64>,
    /// Seed for parameter initialization.
    #[arg(long)]
    init_seed: Option<u64>,
    /// Multiplier on the initial weights of the last layer.
    #[arg(long)]
    output_init_scale: Option<f64>,

    /// nesterov or adam
    #[arg(long)]
    optimizer: Option<OptimizerKind>,
    /// Initial learning rate.
    #[arg(long)]
    lr: Option<f64>,
    /// Momentum (Nesterov) or first-moment decay (Adam).
    #[arg(long)]
    momentum: Option<f64>,
    /// Samples per optimizer step.
    #[arg(long)]
    batch_size: Option<usize>,
    /// Passes over the training set.
    #[arg(long)]
    epochs: Option<usize>,
    /// Factor applied to the learning rate every `decay-every` epochs.
    #[arg(long)]
    lr_decay: Option<f64>,
    /// Epochs between learning-rate decays.
    #[arg(long)]
    decay_every: Option<usize>,
    /// Seed for shuffling and dropout masks.
    #[arg(long)]
    seed: Option<u64>,
    /// Stop after this many optimizer steps.
    #[arg(long)]
    max_steps: Option<usize>,
    /// Epochs between intermediate checkpoints.
    #[arg(long)]
    checkpoint_every: Option<usize>,
}

#[derive(Args, Debug)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test-split dataset files; may be repeated.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// Recursion of the evaluation grid.
    #[arg(long, default_value_t = 5)]
    grid_recursion: u32,
    /// Report path (default: eval.json).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct VizArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    checkpoint: PathBuf,
    /// Test-split dataset file.
    #[arg(long)]
    data: PathBuf,
    /// Sample index within the dataset.
    #[arg(long)]
    index: usize,
    /// Output grid recursion (default: the training grid).
    #[arg(long)]
    grid_recursion: Option<u32>,
    /// Probability threshold for drawing a cell (default: 4x uniform).
    #[arg(long)]
    threshold: Option<f64>,
    /// SVG path (default: sample<index>.svg).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SelftestArgs {
    /// Scale the Wigner block of this degree by 1.5 before running.
    #[arg(long, hide = true)]
    inject_fault: Option<usize>,
}

/// Resolved configuration of a training run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct RunConfig {
    model: ModelConfig,
    train: TrainConfig,
}

fn out_path(explicit: &Option<PathBuf>, default_name: &str) -> PathBuf {
    match explicit {
        Some(p) => p.clone(),
        None => std::env::var_os(OUT_DIR_ENV)
            .map_or_else(|| PathBuf::from("."), PathBuf::from)
            .join(default_name),
    }
}

fn cache_dir() -> Option<PathBuf> {
    std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from)
}

fn so3_grid(recursion: u32) -> Result<Arc<SO3Grid>> {
    let dir = cache_dir();
    if let Some(d) = &dir {
        std::fs::create_dir_all(d)?;
    }
    Ok(Arc::new(so3_grid_cached(recursion, dir.as_deref())?))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn cmd_generate(a: &GenerateArgs) -> Result<()> {
    let shape: Shape = a.shape.parse()?;
    let split: Split = a.split.parse()?;
    let out = out_path(&a.out, &format!("{}_{}.syml", shape.name(), split.name()));
    let start = Instant::now();
    let data = generate(shape, a.n, a.seed, split, &RenderConfig::default())?;
    data.save(&out)?;
    println!(
        "wrote {} {} samples of {} to {} in {:.1}s",
        data.len(),
        split.name(),
        shape.name(),
        out.display(),
        start.elapsed().as_secs_f64()
    );
    Ok(())
}

fn resolve_run_config(a: &TrainArgs, data: &Dataset) -> Result<RunConfig> {
    let mut cfg = match &a.config {
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
        None => {
            let mut c = RunConfig::default();
            c.model.image_height = data.height;
            c.model.image_width = data.width;
            c.model.image_channels = data.channels;
            c
        }
    };
    let m = &mut cfg.model;
    macro_rules! set {
        ($dst:expr, $src:expr) => {
            if let Some(v) = $src {
                $dst = v;
            }
        };
    }
    set!(m.lmax, a.lmax);
    set!(m.projection, a.projection);
    set!(m.s2_filter, a.s2_filter);
    set!(m.n_so3_convs, a.n_so3_convs);
    set!(m.channels, a.channels);
    set!(m.grid_recursion, a.grid_recursion);
    set!(m.support_angle_deg, a.support_angle);
    set!(m.init_seed, a.init_seed);
    set!(m.output_init_scale, a.output_init_scale);
    let t = &mut cfg.train;
    set!(t.optimizer, a.optimizer);
    set!(t.lr, a.lr);
    set!(t.momentum, a.momentum);
    set!(t.batch_size, a.batch_size);
    set!(t.epochs, a.epochs);
    set!(t.lr_decay, a.lr_decay);
    set!(t.decay_every, a.decay_every);
    set!(t.seed, a.seed);
    set!(t.checkpoint_every, a.checkpoint_every);
    if a.max_steps.is_some() {
        t.max_steps = a.max_steps;
    }
    cfg.model.validate()?;
    cfg.train.validate()?;
    if (cfg.model.image_height, cfg.model.image_width, cfg.model.image_channels)
        != (data.height, data.width, data.channels)
    {
        return Err(Error::Config(format!(
            "model expects {}x{}x{} images but the dataset holds {}x{}x{}",
            cfg.model.image_height,
            cfg.model.image_width,
            cfg.model.image_channels,
            data.height,
            data.width,
            data.channels
        )));
    }
    Ok(cfg)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let cfg = resolve_run_config(a, &data)?;
    let out = trainer::output_in(&out_path(&a.out, "run"));
    std::fs::create_dir_all(&out.dir)?;
    write_json(&out.dir.join("config.json"), &cfg)?;
    let grid = so3_grid(cfg.model.grid_recursion)?;
    let mut model = Model::with_grid(cfg.model.clone(), grid)?;
    model.randomize();
    eprintln!(
        "training {} parameters on {} {} samples",
        model.n_params(),
        data.len(),
        data.shape.name()
    );
    let report = trainer::train(&mut model, &cfg.train, &data, Some(&out), &mut |r| {
        eprintln!(
            "epoch {:3}  step {:6}  loss {:.4}  lr {:.2e}  {:.0}s",
            r.epoch, r.steps, r.loss, r.lr, r.wall_time_s
        )
    })?;
    let first = report.step_losses.first().copied().unwrap_or(f64::NAN);
    let last = report.step_losses.last().copied().unwrap_or(f64::NAN);
    println!(
        "trained {} steps (loss {first:.4} -> {last:.4}); checkpoint {}",
        report.step_losses.len(),
        out.final_checkpoint().display()
    );
    Ok(())
}

fn load_model(ck: Checkpoint, grid: Option<Arc<SO3Grid>>) -> Result<Model> {
    let train_grid = so3_grid(ck.meta.model.grid_recursion)?;
    let mut model = Model::with_grid(ck.meta.model.clone(), grid.unwrap_or(train_grid))?;
    if model.param_names() != ck.meta.tensors {
        return Err(Error::Config(
            "checkpoint tensors do not match the layout of its model config".into(),
        ));
    }
    model.set_params(&ck.params)?;
    Ok(model)
}

fn check_dataset(model: &Model, data: &Dataset, path: &Path) -> Result<()> {
    let c = &model.config;
    if (c.image_height, c.image_width, c.image_channels) != (data.height, data.width, data.channels) {
        return Err(Error::Config(format!(
            "{} holds {}x{}x{} images; the checkpoint expects {}x{}x{}",
            path.display(),
            data.height,
            data.width,
            data.channels,
            c.image_height,
            c.image_width,
            c.image_channels
        )));
    }
    Ok(())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let ck = read_checkpoint(&a.checkpoint)?;
    let meta = ck.meta.clone();
    let grid = so3_grid(a.grid_recursion)?;
    let model = load_model(ck, None)?;
    let mut shapes = Vec::new();
    let mut all = Vec::new();
    let mut sources = Vec::new();
    for path in &a.data {
        let data = Dataset::load(path)?;
        check_dataset(&model, &data, path)?;
        let start = Instant::now();
        let results = evalviz::evaluate(&model, &data, &grid)?;
        let report = evalviz::shape_report(&data, &results)?;
        eprintln!(
            "{}: ll {:.3}  median err {:.2} deg  acc15 {:.3}  ({:.0}s)",
            report.shape,
            report.overall.avg_log_likelihood,
            report.overall.median_err_deg,
            report.overall.acc15,
            start.elapsed().as_secs_f64()
        );
        sources.push(serde_json::json!({
            "path": path.display().to_string(),
            "generation": serde_json::from_str::<serde_json::Value>(&data.config)
                .unwrap_or(serde_json::Value::Null),
        }));
        shapes.push(report);
        all.extend(results);
    }
    let report = EvalReport {
        grid_recursion: a.grid_recursion,
        grid_size: grid.len(),
        shapes,
        aggregate: MetricSummary::from_samples(&all)?,
        config: serde_json::json!({
            "checkpoint": a.checkpoint.display().to_string(),
            "model": meta.model,
            "train": meta.train,
            "epoch": meta.epoch,
            "step": meta.step,
            "datasets": sources,
        }),
    };
    let out = out_path(&a.out, "eval.json");
    std::fs::write(&out, report.to_json()?)?;
    println!(
        "avg log-likelihood {:.4} over {} samples; report {}",
        report.aggregate.avg_log_likelihood,
        report.aggregate.count,
        out.display()
    );
    Ok(())
}

fn cmd_viz(a: &VizArgs) -> Result<()> {
    let ck = read_checkpoint(&a.checkpoint)?;
    let meta = ck.meta.clone();
    let grid = so3_grid(a.grid_recursion.unwrap_or(meta.model.grid_recursion))?;
    let model = load_model(ck, Some(grid.clone()))?;
    let data = Dataset::load(&a.data)?;
    check_dataset(&model, &data, &a.data)?;
    let dist = evalviz::predict(&model, &grid, &data, a.index)?;
    let sample = &data.samples[a.index];
    let truth = if sample.equivalent.is_empty() {
        vec![sample.label]
    } else {
        sample.equivalent.clone()
    };
    let metadata = serde_json::json!({
        "checkpoint": a.checkpoint.display().to_string(),
        "model": meta.model,
        "dataset": a.data.display().to_string(),
        "index": a.index,
        "grid_recursion": grid.recursion,
        "threshold": a.threshold,
    })
    .to_string();
    let out = out_path(&a.out, &format!("sample{}.svg", a.index));
    let svg = mollweide::mollweide_svg(
        &dist,
        &truth,
        a.threshold,
        &mollweide::MollweideStyle::default(),
        Some(&metadata),
    );
    std::fs::write(&out, &svg)?;
    println!(
        "{} cells above threshold; wrote {}",
        mollweide::count_dots(&svg),
        out.display()
    );
    Ok(())
}

fn cmd_selftest(a: &SelftestArgs) -> Result<bool> {
    if let Some(l) = a.inject_fault {
        fault::arm(l, 1.5);
    }
    let start = Instant::now();
    let results = selftest::run();
    let mut ok = true;
    for r in &results {
        ok &= r.passed;
        println!(
            "{:<4} {:<26} {:>11.3e} (tol {:.0e})  {:.2}s",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.value,
            r.tolerance,
            r.seconds
        );
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        println!("all {} checks passed in {:.1}s", results.len(), start.elapsed().as_secs_f64());
    } else {
        println!("failed checks: {}", failed.join(", "));
    }
    Ok(ok)
}

fn run(cli: &Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    }
    match &cli.command {
        Command::Generate(a) => cmd_generate(a).map(|_| true),
        Command::Train(a) => cmd_train(a).map(|_| true),
        Command::Eval(a) => cmd_eval(a).map(|_| true),
        Command::Viz(a) => cmd_viz(a).map(|_| true),
        Command::Selftest(a) => cmd_selftest(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
