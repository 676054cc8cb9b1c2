//! `uidiff` — screenshot change detection for UI regression testing.
//!
//! Subcommands: `diff` (compare two screenshots), `generate` (synthesize a
//! benchmark dataset), `eval` (score a detector against a dataset), `sweep`
//! (tune one pipeline parameter on the dataset's tuning split).

use anyhow::Context;
use clap::{ArgGroup, Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use uidiff_core::changes::{PipelineParams, Profile, detect_changes};
use uidiff_core::datagen::{self, BaseScreen};
use uidiff_core::detection::load_annotations_path;
use uidiff_core::eval::{
    EvalReport, Method, SweepParam, breakdown_csv, evaluate_pairs, load_pairs, scores_json, sweep,
    sweep_csv,
};
use uidiff_core::model::{DetectionSet, Raster};

#[derive(Parser)]
#[command(name = "uidiff", version, about = "Screenshot change detection for UI regressions")]
struct Cli {
    /// Worker threads for per-pair parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compare two screenshots and write heatmaps, overlays, and a report.
    Diff(DiffArgs),
    /// Generate a synthetic benchmark dataset with ground truth.
    Generate(GenerateArgs),
    /// Score a detection method against a generated dataset.
    Eval(EvalArgs),
    /// Evaluate one pipeline parameter over a grid on the tuning split.
    Sweep(SweepArgs),
}

/// Pipeline parameters shared by `diff` and `eval`. Precedence, lowest to
/// highest: built-in defaults, `--config`, `--profile`, explicit flags.
#[derive(Args)]
struct ParamFlags {
    /// Neighbors per node in the control graph (K >= 1).
    #[arg(long, value_parser = parse_k)]
    k: Option<usize>,
    /// Largest acceptable hash difference between controls (0-64).
    #[arg(long, value_parser = parse_h)]
    h: Option<u32>,
    /// Smallest acceptable text similarity between TEXT controls (0-1).
    #[arg(long, value_parser = parse_unit)]
    ts: Option<f64>,
    /// Smallest neighborhood score at which controls may match (0-1).
    #[arg(long, value_parser = parse_unit)]
    ns: Option<f64>,
    /// Screen-modality preset: desktop (K=8), cut (K=6), or mobile (K=5).
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// TOML file with default parameters (keys k, h, ts, ns).
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct DiffArgs {
    /// Original screenshot (PNG).
    #[arg(long)]
    image_a: PathBuf,
    /// Changed screenshot (PNG).
    #[arg(long)]
    image_b: PathBuf,
    /// Control annotations for image A (required for gvcd and rcd).
    #[arg(long)]
    annots_a: Option<PathBuf>,
    /// Control annotations for image B (required for gvcd and rcd).
    #[arg(long)]
    annots_b: Option<PathBuf>,
    /// Detection engine: gvcd, pwc, or rcd.
    #[arg(long, default_value = "gvcd", value_parser = parse_method)]
    method: Method,
    /// Output directory for heatmaps, overlays, and report.json.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
#[command(group(ArgGroup::new("source").required(true).args(["synthetic", "bases"])))]
struct GenerateArgs {
    /// Synthesize this many base screens procedurally.
    #[arg(long)]
    synthetic: Option<usize>,
    /// Use annotated screenshots from this directory as base screens
    /// (each NAME.png needs a NAME.json annotation file).
    #[arg(long)]
    bases: Option<PathBuf>,
    /// Changed variants to derive from each base.
    #[arg(long, default_value_t = 7)]
    variants: usize,
    /// Apply a random cut-and-shift to every changed screen.
    #[arg(long)]
    cut: bool,
    /// Master seed; the same seed reproduces the dataset byte for byte.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Canvas size for synthesized bases, as WIDTHxHEIGHT.
    #[arg(long, value_parser = parse_canvas, default_value = "1024x768")]
    canvas: (u32, u32),
    /// Output dataset directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: PathBuf,
    /// Detection engine: gvcd, pwc, or rcd.
    #[arg(long, default_value = "gvcd", value_parser = parse_method)]
    method: Method,
    /// Write dataset-level scores as JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the per-pair breakdown as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    params: ParamFlags,
}

#[derive(Args)]
struct SweepArgs {
    /// Dataset manifest written by `generate`.
    #[arg(long)]
    manifest: PathBuf,
    /// Parameter to sweep: k, h, ts, or ns.
    #[arg(long, value_parser = parse_sweep_param)]
    param: SweepParam,
    /// Grid values: an inclusive integer range like 1..10, or a comma list
    /// like 0.5,0.7,0.9.
    #[arg(long, value_parser = parse_values)]
    values: Values,
    /// Values for the parameters held fixed, like h=10,ts=0.7,ns=0.8.
    #[arg(long, value_parser = parse_fixed)]
    fixed: Option<Fixed>,
    /// Screen-modality preset applied before --fixed.
    #[arg(long, value_parser = parse_profile)]
    profile: Option<Profile>,
    /// TOML file with default parameters (keys k, h, ts, ns).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the sweep table as CSV.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone)]
struct Values(Vec<f64>);

#[derive(Clone)]
struct Fixed(Vec<(SweepParam, f64)>);

fn parse_k(s: &str) -> Result<usize, String> {
    let k: usize = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    if k == 0 {
        return Err("k must be at least 1".into());
    }
    Ok(k)
}

fn parse_h(s: &str) -> Result<u32, String> {
    let h: u32 = s.parse().map_err(|_| format!("{s:?} is not an integer"))?;
    if h > 64 {
        return Err("h must lie in 0..=64".into());
    }
    Ok(h)
}

fn parse_unit(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| format!("{s:?} is not a number"))?;
    if !(0.0..=1.0).contains(&v) {
        return Err(format!("{v} is outside the range [0, 1]"));
    }
    Ok(v)
}

fn parse_profile(s: &str) -> Result<Profile, String> {
    match s {
        "desktop" => Ok(Profile::Desktop),
        "cut" => Ok(Profile::Cut),
        "mobile" => Ok(Profile::Mobile),
        other => Err(format!("unknown profile {other:?} (expected desktop, cut, or mobile)")),
    }
}

fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).map_err(|e| e.to_string())
}

fn parse_sweep_param(s: &str) -> Result<SweepParam, String> {
    SweepParam::parse(s).map_err(|e| e.to_string())
}

fn parse_canvas(s: &str) -> Result<(u32, u32), String> {
    let (w, h) = s
        .split_once('x')
        .ok_or_else(|| format!("{s:?} is not WIDTHxHEIGHT"))?;
    let w: u32 = w.trim().parse().map_err(|_| format!("bad width in {s:?}"))?;
    let h: u32 = h.trim().parse().map_err(|_| format!("bad height in {s:?}"))?;
    if w < 152 || h < 96 {
        return Err("canvas must be at least 152x96".into());
    }
    Ok((w, h))
}

fn parse_values(s: &str) -> Result<Values, String> {
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: i64 = lo.trim().parse().map_err(|_| format!("bad range start in {s:?}"))?;
        let hi: i64 = hi.trim().parse().map_err(|_| format!("bad range end in {s:?}"))?;
        if lo > hi {
            return Err(format!("empty range {s:?}"));
        }
        return Ok(Values((lo..=hi).map(|v| v as f64).collect()));
    }
    let vals: Result<Vec<f64>, _> = s.split(',').map(|v| v.trim().parse::<f64>()).collect();
    match vals {
        Ok(v) if !v.is_empty() => Ok(Values(v)),
        _ => Err(format!("{s:?} is neither a range like 1..10 nor a comma list")),
    }
}

fn parse_fixed(s: &str) -> Result<Fixed, String> {
    let mut pairs = Vec::new();
    for item in s.split(',') {
        let (key, value) = item
            .split_once('=')
            .ok_or_else(|| format!("{item:?} is not key=value"))?;
        let param = SweepParam::parse(key.trim()).map_err(|e| e.to_string())?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| format!("bad value in {item:?}"))?;
        pairs.push((param, value));
    }
    Ok(Fixed(pairs))
}

/// Anything that should terminate with exit code 2 instead of 1.
#[derive(Debug)]
enum CliError {
    Validation(String),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

#[derive(serde::Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    k: Option<usize>,
    h: Option<u32>,
    ts: Option<f64>,
    ns: Option<f64>,
}

fn load_config(path: &Path) -> Result<ConfigFile, CliError> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).map_err(|e| invalid(format!("bad config {}: {e}", path.display())))
}

fn apply_config(params: &mut PipelineParams, config: &ConfigFile) {
    if let Some(k) = config.k {
        params.graph.k = k;
    }
    if let Some(h) = config.h {
        params.similarity.max_hash_diff = h;
    }
    if let Some(ts) = config.ts {
        params.similarity.min_text_sim = ts;
    }
    if let Some(ns) = config.ns {
        params.similarity.min_neighbor_sim = ns;
    }
}

fn resolve_params(flags: &ParamFlags) -> Result<PipelineParams, CliError> {
    let mut params = PipelineParams::default();
    if let Some(path) = &flags.config {
        apply_config(&mut params, &load_config(path)?);
    }
    if let Some(profile) = flags.profile {
        params.graph.k = profile.default_k();
    }
    if let Some(k) = flags.k {
        params.graph.k = k;
    }
    if let Some(h) = flags.h {
        params.similarity.max_hash_diff = h;
    }
    if let Some(ts) = flags.ts {
        params.similarity.min_text_sim = ts;
    }
    if let Some(ns) = flags.ns {
        params.similarity.min_neighbor_sim = ns;
    }
    params.validate().map_err(|e| invalid(e.to_string()))?;
    Ok(params)
}

fn load_image(path: &Path) -> Result<Raster, CliError> {
    datagen::load_image(path)
        .map_err(|e| CliError::Runtime(anyhow::Error::new(e).context("loading image")))
}

fn load_annots(path: &Path) -> Result<DetectionSet, CliError> {
    load_annotations_path(path)
        .map_err(|e| CliError::Runtime(anyhow::Error::new(e).context("loading annotations")))
}

fn run_diff(args: DiffArgs) -> Result<(), CliError> {
    let params = resolve_params(&args.params)?;
    let img_a = load_image(&args.image_a)?;
    let img_b = load_image(&args.image_b)?;

    let annots = |path: &Option<PathBuf>, flag: &str| -> Result<DetectionSet, CliError> {
        match path {
            Some(p) => load_annots(p),
            None => Err(invalid(format!(
                "--method {} requires {flag}",
                args.method.as_str()
            ))),
        }
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(CliError::from)?;

    let (outputs, changes) = match args.method {
        Method::Gvcd => {
            let dets_a = annots(&args.annots_a, "--annots-a")?;
            let dets_b = annots(&args.annots_b, "--annots-b")?;
            let report = detect_changes(&img_a, &dets_a, &img_b, &dets_b, &params);
            let n = report.changes_in_original.len() + report.changes_in_changed.len();
            let outputs = report
                .render_outputs(&img_a, &img_b, &args.out)
                .map_err(anyhow::Error::new)?;
            (outputs, n)
        }
        Method::Rcd => {
            let dets_a = annots(&args.annots_a, "--annots-a")?;
            let dets_b = annots(&args.annots_b, "--annots-b")?;
            let report = uidiff_core::baselines::region_based_detect(&img_a, &dets_a, &img_b, &dets_b);
            let n = report.changes_in_original.len() + report.changes_in_changed.len();
            let outputs = report
                .render_outputs(&img_a, &img_b, &args.out)
                .map_err(anyhow::Error::new)?;
            (outputs, n)
        }
        Method::Pwc => {
            let outcome = uidiff_core::baselines::pixel_wise_detect(&img_a, &img_b);
            let n = outcome
                .report()
                .map_or(0, |r| r.changes_in_original.len() + r.changes_in_changed.len());
            let outputs = outcome
                .render_outputs(&img_a, &img_b, &args.out)
                .map_err(anyhow::Error::new)?;
            (outputs, n)
        }
    };
    println!(
        "{}: {} change region(s); report at {}",
        args.method.as_str(),
        changes,
        outputs.report.display()
    );
    Ok(())
}

fn load_bases(dir: &Path) -> Result<Vec<BaseScreen>, CliError> {
    let mut pngs: Vec<PathBuf> = std::fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))
        .map_err(CliError::from)?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "png"))
        .collect();
    pngs.sort();
    if pngs.is_empty() {
        return Err(invalid(format!("no .png files under {}", dir.display())));
    }
    pngs.into_iter()
        .map(|png| {
            let img = load_image(&png)?;
            let annots = png.with_extension("json");
            if !annots.is_file() {
                return Err(invalid(format!(
                    "{} has no matching annotation file {}",
                    png.display(),
                    annots.display()
                )));
            }
            let dets = load_annots(&annots)?;
            Ok(BaseScreen { img, dets })
        })
        .collect()
}

fn run_generate(args: GenerateArgs) -> Result<(), CliError> {
    let bases = match (&args.synthetic, &args.bases) {
        (Some(n), None) => datagen::synthesize_bases(*n, args.canvas, args.seed),
        (None, Some(dir)) => load_bases(dir)?,
        _ => unreachable!("clap enforces exactly one source"),
    };
    if args.variants == 0 {
        return Err(invalid("--variants must be at least 1"));
    }
    let pairs = datagen::generate_dataset(&bases, args.variants, args.cut, args.seed);
    let manifest = datagen::write_dataset(&args.out, &pairs, args.seed, args.cut)
        .map_err(anyhow::Error::new)?;
    println!(
        "wrote {} pair(s) ({} base(s) x {} variant(s)) to {}",
        manifest.pairs.len(),
        bases.len(),
        args.variants,
        args.out.display()
    );
    Ok(())
}

fn print_scores(report: &EvalReport) {
    println!("method: {} ({} pairs)", report.method.as_str(), report.pair_count);
    println!("iou     tp    fp    fn    precision  recall  fscore");
    for s in &report.scores {
        println!(
            "{:<7} {:<5} {:<5} {:<5} {:<10.4} {:<7.4} {:<6.4}",
            s.iou_threshold,
            s.true_positives,
            s.false_positives,
            s.false_negatives,
            s.precision,
            s.recall,
            s.fscore
        );
    }
}

fn run_eval(args: EvalArgs) -> Result<(), CliError> {
    let params = resolve_params(&args.params)?;
    let pairs = load_pairs(&args.manifest).map_err(anyhow::Error::new)?;
    let report = evaluate_pairs(&pairs, args.method, &params).map_err(anyhow::Error::new)?;
    print_scores(&report);
    let mismatches = report.per_pair.iter().filter(|p| p.dimension_mismatch).count();
    if mismatches > 0 {
        println!("{mismatches} pair(s) had mismatched canvas sizes");
    }
    if let Some(path) = &args.out {
        std::fs::write(path, scores_json(&report, &params))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::from)?;
    }
    if let Some(path) = &args.csv {
        std::fs::write(path, breakdown_csv(&report))
            .with_context(|| format!("writing {}", path.display()))
            .map_err(CliError::from)?;
    }
    Ok(())
}

fn run_sweep(args: SweepArgs) -> Result<(), CliError> {
    let mut base = PipelineParams::default();
    if let Some(path) = &args.config {
        apply_config(&mut base, &load_config(path)?);
    }
    if let Some(profile) = args.profile {
        base.graph.k = profile.default_k();
    }
    if let Some(Fixed(pairs)) = &args.fixed {
        for &(param, value) in pairs {
            base = param.apply(value, &base).map_err(|e| invalid(e.to_string()))?;
        }
    }
    base.validate().map_err(|e| invalid(e.to_string()))?;
    for &value in &args.values.0 {
        args.param
            .apply(value, &base)
            .map_err(|e| invalid(e.to_string()))?;
    }

    let manifest = datagen::load_manifest(&args.manifest).map_err(anyhow::Error::new)?;
    let pairs = load_pairs(&args.manifest).map_err(anyhow::Error::new)?;
    let table = sweep(&pairs, manifest.seed, args.param, &args.values.0, &base)
        .map_err(anyhow::Error::new)?;
    std::fs::write(&args.out, sweep_csv(&table))
        .with_context(|| format!("writing {}", args.out.display()))
        .map_err(CliError::from)?;
    let best = table.best();
    println!(
        "swept {} over {} value(s) on the tuning split; best {}={} with F@0.5 = {:.4} ({})",
        args.param.as_str(),
        table.rows.len(),
        args.param.as_str(),
        best.value,
        best.scores[1].fscore,
        args.out.display()
    );
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(invalid("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("initializing worker pool")?;
    }
    match cli.command {
        Command::Diff(args) => run_diff(args),
        Command::Generate(args) => run_generate(args),
        Command::Eval(args) => run_eval(args),
        Command::Sweep(args) => run_sweep(args),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
