mod config;
mod output;
mod plot;

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use recmap_core::degradation::{DegradationParams, Pipeline, StageBypass};
use recmap_core::geometry::AnglePair;
use recmap_core::metrics::Metric;
use recmap_core::plate::render_plate;
use recmap_core::recoverability::{
    self as rec, eval_grid, io, max_map, proxy_fit, proxy_points, recmap_from_table, DensityRule,
    GridConfig, GridExtent, IndicatorChannel, DEFAULT_BINS, DEFAULT_THRESHOLD,
};
use recmap_core::restorers::RestorerSpec;
use recmap_core::rng::{domain, keyed, random_digits};
use recmap_core::sampling::{build_dataset, AnglePdfVariant, DatasetSpec, VariantName};

use config::{default_seed, RunConfig};
use output::{finish_dir, run_record, sidecar_path, staging_dir, Outputs};

#[derive(Parser)]
#[command(name = "recmap", version, about = "Oblique license-plate recoverability benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON or TOML config file (a previous run.json is accepted)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Suppress progress output on stderr
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Render a clean plate, or its distorted restorer input when angles are given
    Render(RenderArgs),
    /// Generate a paired clean/distorted dataset with a JSON manifest
    GenDataset(DatasetArgs),
    /// Evaluate a restorer over the integer angle grid and write a CSV table
    EvalGrid(EvalArgs),
    /// Threshold an evaluation table into a recoverability map
    Map(MapArgs),
    /// Merge recoverability maps by pointwise maximum
    MaxMap(MaxMapArgs),
    /// Fit plate OCR rate against PSNR or SSIM
    Proxy(ProxyArgs),
    /// Draw a heatmap of a table channel or of a recoverability map
    Plot(PlotArgs),
}

#[derive(Args)]
struct RenderArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    digits: Option<String>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct DatasetArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, value_parser = parse_variant)]
    variant: Option<VariantName>,
    #[arg(long)]
    seed: Option<u64>,
    /// Total number of pairs (default 10240)
    #[arg(long)]
    pairs: Option<usize>,
    /// Train, validation and test counts, e.g. 8192,1024,1024
    #[arg(long, value_parser = parse_splits)]
    splits: Option<[usize; 3]>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// identity, unsharp, wiener or plugin:"CMD ARGS"
    #[arg(long)]
    restorer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (default: logical cores)
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    easy_n: Option<usize>,
    #[arg(long)]
    hard_n: Option<usize>,
    #[arg(long)]
    easy_cutoff: Option<u32>,
    /// Inclusive alpha range LO:HI
    #[arg(long, value_parser = parse_range)]
    alpha_range: Option<[u32; 2]>,
    /// Inclusive beta range LO:HI
    #[arg(long, value_parser = parse_range)]
    beta_range: Option<[u32; 2]>,
    /// Comma-separated stages to skip: edge, jitter, blur, jpeg
    #[arg(long, value_delimiter = ',')]
    bypass: Option<Vec<String>>,
    #[arg(long)]
    unsharp_amount: Option<f64>,
    #[arg(long)]
    unsharp_sigma: Option<f64>,
    #[arg(long)]
    wiener_sigma: Option<f64>,
    #[arg(long)]
    wiener_nsr: Option<f64>,
    /// Plugin processes (default: --jobs)
    #[arg(long)]
    plugin_workers: Option<usize>,
    /// Spawn a fresh plugin process for every image
    #[arg(long)]
    plugin_fresh: bool,
    /// Per-image plugin timeout in seconds
    #[arg(long)]
    plugin_timeout: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eval: PathBuf,
    #[arg(long)]
    threshold: Option<f64>,
    /// plate (all six digits correct) or digit (mean digit accuracy)
    #[arg(long, value_parser = parse_channel)]
    channel: Option<IndicatorChannel>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MaxMapArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, num_args = 1.., required = true)]
    maps: Vec<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProxyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    eval: PathBuf,
    #[arg(long, value_parser = parse_metric)]
    metric: Option<Metric>,
    #[arg(long)]
    bins: Option<usize>,
    /// Scatter points CSV (default: <out>.scatter.csv)
    #[arg(long)]
    scatter: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PlotArgs {
    #[command(flatten)]
    common: Common,
    /// Evaluation table (.csv) or recoverability map (.json)
    #[arg(long)]
    input: PathBuf,
    /// ocr_plate, ocr_digit, psnr, ssim or recoverable
    #[arg(long)]
    channel: Option<String>,
    /// Threshold for the recoverable channel of a table
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

fn parse_variant(s: &str) -> Result<VariantName, String> {
    match s {
        "standard" => Ok(VariantName::Standard),
        "extreme" => Ok(VariantName::Extreme),
        _ => Err(format!("unknown variant {s:?}; expected standard or extreme")),
    }
}

fn parse_channel(s: &str) -> Result<IndicatorChannel, String> {
    match s {
        "plate" => Ok(IndicatorChannel::Plate),
        "digit" => Ok(IndicatorChannel::Digit),
        _ => Err(format!("unknown channel {s:?}; expected plate or digit")),
    }
}

fn parse_metric(s: &str) -> Result<Metric, String> {
    match s {
        "psnr" => Ok(Metric::Psnr),
        "ssim" => Ok(Metric::Ssim),
        _ => Err(format!("unknown metric {s:?}; expected psnr or ssim")),
    }
}

fn parse_range(s: &str) -> Result<[u32; 2], String> {
    let (lo, hi) = s
        .split_once(':')
        .ok_or_else(|| format!("expected LO:HI, got {s:?}"))?;
    let p = |v: &str| v.trim().parse::<u32>().map_err(|e| format!("{v:?}: {e}"));
    Ok([p(lo)?, p(hi)?])
}

fn parse_splits(s: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected three comma-separated counts, got {s:?}"));
    }
    let mut out = [0; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p.trim().parse().map_err(|e| format!("{p:?}: {e}"))?;
    }
    Ok(out)
}

fn load_config(common: &Common) -> Result<RunConfig> {
    match &common.config {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    }
}

fn resolve_seed(flag: Option<u64>, file: Option<u64>) -> Result<u64> {
    match flag.or(file) {
        Some(s) => Ok(s),
        None => default_seed(),
    }
}

fn thread_pool(jobs: usize) -> Result<rayon::ThreadPool> {
    if jobs == 0 {
        bail!("--jobs must be at least 1");
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("starting worker threads")
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn parse_bypass(stages: &[String]) -> Result<StageBypass> {
    let mut b = StageBypass::NONE;
    for s in stages {
        match s.trim() {
            "edge" => b.edge = true,
            "jitter" => b.jitter = true,
            "blur" => b.blur = true,
            "jpeg" => b.jpeg = true,
            "" => {}
            other => bail!("unknown stage {other:?}; expected edge, jitter, blur or jpeg"),
        }
    }
    Ok(b)
}

fn render(args: RenderArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let digits = match args.digits.or(file.digits) {
        Some(d) => d,
        None => random_digits(&mut keyed(seed, domain::RENDER, 0)),
    };
    let alpha = args.alpha.or(file.alpha);
    let beta = args.beta.or(file.beta);
    let truth = render_plate(&digits)?;
    let img = match (alpha, beta) {
        (None, None) => truth.image.clone(),
        (a, b) => {
            let angles = AnglePair::new(a.unwrap_or(0.0), b.unwrap_or(0.0));
            let mut rng = keyed(seed, domain::RENDER, 1);
            let params = DegradationParams::sample(angles, &mut rng);
            Pipeline::default().degrade(&truth, &params, seed)?.input
        }
    };
    let resolved = RunConfig {
        seed: Some(seed),
        digits: Some(digits),
        alpha,
        beta,
        ..Default::default()
    };
    let mut png = Vec::new();
    img.write_png(&mut png)?;
    let mut outs = Outputs::default();
    outs.write(&args.out, &png)?;
    let sidecar = sidecar_path(&args.out);
    outs.write(&sidecar, &run_record("render", &resolved, &[&args.out])?)?;
    outs.commit();
    Ok(())
}

fn gen_dataset(args: DatasetArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let variant = args.variant.or(file.variant).unwrap_or(VariantName::Standard);
    let mut spec = DatasetSpec::table1(AnglePdfVariant::by_name(variant), seed);
    if let Some(p) = args.pairs.or(file.pairs) {
        spec.total_pairs = p;
    }
    if let Some(s) = args.splits.or(file.splits) {
        spec.splits = s;
    }
    spec.validate()?;
    let resolved = RunConfig {
        seed: Some(seed),
        variant: Some(variant),
        pairs: Some(spec.total_pairs),
        splits: Some(spec.splits),
        ..Default::default()
    };
    let pool = thread_pool(args.jobs.unwrap_or_else(default_jobs))?;
    let stage = staging_dir(&args.out)?;
    let mut outs = Outputs::default();
    outs.track(&stage);
    if !args.common.quiet {
        eprintln!("gen-dataset: rendering {} pairs", spec.total_pairs);
    }
    pool.install(|| build_dataset(&spec, &Pipeline::default(), &stage))?;
    outs.write(&stage.join("run.json"), &run_record("gen-dataset", &resolved, &[&args.out])?)?;
    finish_dir(&stage, &args.out)?;
    outs.commit();
    Ok(())
}

fn restorer_spec(args: &EvalArgs, file: &RunConfig, jobs: usize) -> Result<RestorerSpec> {
    let sel = args
        .restorer
        .clone()
        .or_else(|| file.restorer.clone())
        .unwrap_or_else(|| "identity".into());
    let mut spec: RestorerSpec = sel.parse()?;
    match &mut spec {
        RestorerSpec::Identity => {}
        RestorerSpec::Unsharp { amount, sigma } => {
            *amount = args.unsharp_amount.or(file.unsharp_amount).unwrap_or(*amount);
            *sigma = args.unsharp_sigma.or(file.unsharp_sigma).unwrap_or(*sigma);
        }
        RestorerSpec::Wiener { sigma_est, nsr } => {
            *sigma_est = args.wiener_sigma.or(file.wiener_sigma).unwrap_or(*sigma_est);
            *nsr = args.wiener_nsr.or(file.wiener_nsr).unwrap_or(*nsr);
        }
        RestorerSpec::Plugin {
            workers,
            fresh,
            timeout_secs,
            ..
        } => {
            *workers = args.plugin_workers.or(file.plugin_workers).unwrap_or(jobs);
            *fresh = args.plugin_fresh || file.plugin_fresh.unwrap_or(false);
            *timeout_secs = args.plugin_timeout.or(file.plugin_timeout).unwrap_or(*timeout_secs);
        }
    }
    spec.validate()?;
    Ok(spec)
}

fn eval(args: EvalArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let seed = resolve_seed(args.seed, file.seed)?;
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    let pool = thread_pool(jobs)?;
    let spec = restorer_spec(&args, &file, jobs)?;
    let defaults = DensityRule::default();
    let density = DensityRule {
        easy_n: args.easy_n.or(file.easy_n).unwrap_or(defaults.easy_n),
        hard_n: args.hard_n.or(file.hard_n).unwrap_or(defaults.hard_n),
        easy_cutoff: args.easy_cutoff.or(file.easy_cutoff).unwrap_or(defaults.easy_cutoff),
    };
    let full = GridExtent::default();
    let alpha = args.alpha_range.or(file.alpha_range).unwrap_or([full.alpha.0, full.alpha.1]);
    let beta = args.beta_range.or(file.beta_range).unwrap_or([full.beta.0, full.beta.1]);
    let extent = GridExtent {
        alpha: (alpha[0], alpha[1]),
        beta: (beta[0], beta[1]),
    };
    let bypass_list = args.bypass.clone().or_else(|| file.bypass.clone()).unwrap_or_default();
    let pipeline = Pipeline {
        bypass: parse_bypass(&bypass_list)?,
        ..Pipeline::default()
    };
    let cfg = GridConfig {
        seed,
        extent,
        density,
    };
    let mut resolved = RunConfig {
        seed: Some(seed),
        restorer: Some(spec.to_string()),
        easy_n: Some(density.easy_n),
        hard_n: Some(density.hard_n),
        easy_cutoff: Some(density.easy_cutoff),
        alpha_range: Some(alpha),
        beta_range: Some(beta),
        bypass: (!bypass_list.is_empty()).then_some(bypass_list),
        ..Default::default()
    };
    match &spec {
        RestorerSpec::Unsharp { amount, sigma } => {
            resolved.unsharp_amount = Some(*amount);
            resolved.unsharp_sigma = Some(*sigma);
        }
        RestorerSpec::Wiener { sigma_est, nsr } => {
            resolved.wiener_sigma = Some(*sigma_est);
            resolved.wiener_nsr = Some(*nsr);
        }
        RestorerSpec::Plugin {
            workers,
            fresh,
            timeout_secs,
            ..
        } => {
            resolved.plugin_workers = Some(*workers);
            resolved.plugin_fresh = Some(*fresh);
            resolved.plugin_timeout = Some(*timeout_secs);
        }
        RestorerSpec::Identity => {}
    }

    let restorer = spec.build()?;
    let quiet = args.common.quiet;
    let progress = move |done: usize, total: usize| {
        if quiet {
            return;
        }
        let step = (total / 100).max(1);
        if done % step == 0 || done == total {
            let mut err = std::io::stderr().lock();
            let _ = write!(err, "\reval-grid: {done}/{total} cells");
            if done == total {
                let _ = writeln!(err);
            }
        }
    };
    let table = pool.install(|| eval_grid(&cfg, &pipeline, &restorer, Some(&progress)))?;
    drop(restorer);
    let failed = table.failed_count();
    if failed > 0 {
        eprintln!("eval-grid: {failed} cell(s) failed");
        for c in table.cells.iter().filter(|c| c.is_failed()).take(5) {
            eprintln!("  {}", c.failed.as_deref().unwrap_or_default());
        }
    }
    let mut outs = Outputs::default();
    outs.write(&args.out, io::evaltable_to_csv(&table).as_bytes())?;
    outs.write(&sidecar_path(&args.out), &run_record("eval-grid", &resolved, &[&args.out])?)?;
    outs.commit();
    Ok(())
}

fn map(args: MapArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let threshold = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
    if !(0.0..=1.0).contains(&threshold) {
        bail!("--threshold must lie in [0, 1], got {threshold}");
    }
    let channel = args.channel.or(file.channel).unwrap_or_default();
    let table = io::load_evaltable(&args.eval)?;
    let m = recmap_from_table(&table, threshold, channel)?;
    let resolved = RunConfig {
        threshold: Some(threshold),
        channel: Some(channel),
        ..Default::default()
    };
    let mut outs = Outputs::default();
    outs.write(&args.out, &io::to_json_bytes(&m)?)?;
    outs.write(&sidecar_path(&args.out), &run_record("map", &resolved, &[&args.out])?)?;
    outs.commit();
    if !args.common.quiet {
        eprintln!(
            "map: auc {:.6}, F {:.6}, {} interior failure(s)",
            m.auc,
            m.f_score,
            m.interior_failures.len()
        );
    }
    Ok(())
}

fn merge_maps(args: MaxMapArgs) -> Result<()> {
    let maps = args
        .maps
        .iter()
        .map(|p| io::load_recmap(p).with_context(|| format!("loading {}", p.display())))
        .collect::<Result<Vec<_>>>()?;
    let merged = max_map(&maps)?;
    let resolved = RunConfig {
        threshold: Some(merged.threshold),
        channel: Some(merged.channel),
        ..Default::default()
    };
    let mut outs = Outputs::default();
    outs.write(&args.out, &io::to_json_bytes(&merged)?)?;
    outs.write(&sidecar_path(&args.out), &run_record("max-map", &resolved, &[&args.out])?)?;
    outs.commit();
    Ok(())
}

fn proxy(args: ProxyArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let metric = args.metric.or(file.metric).unwrap_or(Metric::Psnr);
    let bins = args.bins.or(file.bins).unwrap_or(DEFAULT_BINS);
    let table = io::load_evaltable(&args.eval)?;
    let fit = proxy_fit(&table, metric, bins)?;
    let scatter_path = args.scatter.clone().unwrap_or_else(|| {
        let mut name = args.out.file_name().unwrap_or_default().to_os_string();
        name.push(".scatter.csv");
        args.out.with_file_name(name)
    });
    let (points, _) = proxy_points(&table, metric);
    let mut scatter = format!("{},ocr_plate\n", if metric == Metric::Psnr { "psnr" } else { "ssim" });
    for (x, y) in points {
        scatter.push_str(&format!("{x:.6},{y:.6}\n"));
    }
    let resolved = RunConfig {
        metric: Some(metric),
        bins: Some(bins),
        ..Default::default()
    };
    let mut outs = Outputs::default();
    outs.write(&args.out, &io::to_json_bytes(&fit)?)?;
    outs.write(&scatter_path, scatter.as_bytes())?;
    outs.write(
        &sidecar_path(&args.out),
        &run_record("proxy", &resolved, &[&args.out, &scatter_path])?,
    )?;
    outs.commit();
    Ok(())
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn plot_cmd(args: PlotArgs) -> Result<()> {
    let file = load_config(&args.common)?;
    let channel = args
        .channel
        .clone()
        .or(file.plot_channel.clone())
        .unwrap_or_else(|| {
            if is_json(&args.input) {
                "recoverable".into()
            } else {
                "ocr_plate".into()
            }
        });
    let mut resolved = RunConfig {
        plot_channel: Some(channel.clone()),
        ..Default::default()
    };
    let img = if is_json(&args.input) {
        if channel != "recoverable" {
            bail!("a recoverability map only has the `recoverable` channel, not {channel:?}");
        }
        let m = io::load_recmap(&args.input)?;
        plot::plot_map(&m.bool_grid()?, &m.envelopes())
    } else {
        let table = io::load_evaltable(&args.input)?;
        let n = table.square_size()?;
        if channel == "recoverable" {
            let t = args.threshold.or(file.threshold).unwrap_or(DEFAULT_THRESHOLD);
            resolved.threshold = Some(t);
            let grid = rec::indicator(&table, t, IndicatorChannel::Plate)?;
            plot::plot_map(&grid, &rec::envelopes(&grid))
        } else {
            let ch = plot::Channel::parse(&channel).with_context(|| {
                format!("unknown channel {channel:?}; expected ocr_plate, ocr_digit, psnr, ssim or recoverable")
            })?;
            plot::plot_table(&table, n, ch)
        }
    };
    let mut png = Vec::new();
    img.write_png(&mut png)?;
    let mut outs = Outputs::default();
    outs.write(&args.out, &png)?;
    outs.write(&sidecar_path(&args.out), &run_record("plot", &resolved, &[&args.out])?)?;
    outs.commit();
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Render(a) => render(a),
        Command::GenDataset(a) => gen_dataset(a),
        Command::EvalGrid(a) => eval(a),
        Command::Map(a) => map(a),
        Command::MaxMap(a) => merge_maps(a),
        Command::Proxy(a) => proxy(a),
        Command::Plot(a) => plot_cmd(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
