use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use crowdmap::annotations::load_annotations;
use crowdmap::bench::{self, delta_key, BenchConfig, Method};
use crowdmap::centers::{load_centers, save_centers, CentersDoc};
use crowdmap::core::eval::{match_and_ap, EvalConfig, DEFAULT_IOU_THRESHOLD};
use crowdmap::core::gtgen::{
    generate_attention_threshold, generate_attention_window, generate_density_map, AttentionMap, NoiseLevel,
    Placement, SceneConfig, SigmaPolicy, DEFAULT_ATTENTION_QUANTILE, DEFAULT_ATTENTION_WINDOW, DEFAULT_BETA,
    DEFAULT_FIXED_SIGMA, DEFAULT_K_NEIGHBORS,
};
use crowdmap::core::localize::{DbscanParams, KMeansParams, DEFAULT_EPSILON, DEFAULT_MIN_WEIGHT};
use crowdmap::core::loss::{
    attention_loss, combine_total, curriculum_weights, msdlc_loss, mse_loss, sal_loss, ssim_loss,
    weighted_mse_loss, CurriculumSchedule, LossWeights, Pooling, SsimConfig, SsimKernel, DEFAULT_CURRICULUM_INTERCEPT,
    DEFAULT_CURRICULUM_SLOPE, DEFAULT_LAMBDA_ATT, DEFAULT_SAL_LEVELS,
};
use crowdmap::core::{DensityMap, ExpansionFactor};
use crowdmap::dmf::{read_density_map, write_density_map};
use crowdmap::pgm::write_pgm;
use crowdmap::{Error, Result};

#[derive(Parser)]
#[command(name = "crowdmap", version, about = "Crowd density maps: generation, losses, localization, evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a density map from head annotations.
    Gen(GenArgs),
    /// Build a binary attention mask.
    Attention(AttentionArgs),
    /// Recover head centers from a density map.
    Localize(LocalizeArgs),
    /// Score centers against annotations.
    Eval(EvalArgs),
    /// Compare localizers on seeded synthetic scenes.
    Bench(BenchArgs),
    /// Render a density map (and optional centers) as a PGM image.
    Viz(VizArgs),
    /// Compute losses between a predicted and a ground-truth map.
    Losses(LossesArgs),
}

#[derive(Args, Clone)]
struct SigmaArgs {
    /// `adaptive` or `fixed[:SIGMA]`.
    #[arg(long, default_value = "adaptive")]
    sigma: String,
    #[arg(long, default_value_t = DEFAULT_BETA)]
    beta: f64,
    #[arg(long, default_value_t = DEFAULT_K_NEIGHBORS)]
    k_neighbors: usize,
    /// Bandwidth for heads with too few neighbors.
    #[arg(long, default_value_t = DEFAULT_FIXED_SIGMA)]
    fallback_sigma: f64,
}

impl SigmaArgs {
    fn policy(&self) -> Result<SigmaPolicy> {
        let mut policy = match self.sigma.as_str() {
            "adaptive" => SigmaPolicy::adaptive(self.beta, self.k_neighbors),
            "fixed" => SigmaPolicy::fixed(DEFAULT_FIXED_SIGMA),
            s => match s.strip_prefix("fixed:").map(str::parse::<f64>) {
                Some(Ok(v)) => SigmaPolicy::fixed(v),
                _ => return Err(Error::Usage(format!("bad --sigma `{s}` (expected adaptive or fixed:SIGMA)"))),
            },
        };
        policy.beta = self.beta;
        policy.k_neighbors = self.k_neighbors;
        policy.fallback_sigma = self.fallback_sigma;
        policy.validate()?;
        Ok(policy)
    }
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    annotations: PathBuf,
    #[command(flatten)]
    sigma: SigmaArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct AttentionArgs {
    /// Window mode: mark a square around every head.
    #[arg(long, conflicts_with = "density", required_unless_present = "density")]
    annotations: Option<PathBuf>,
    /// Threshold mode: mark pixels above a density quantile.
    #[arg(long)]
    density: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ATTENTION_WINDOW)]
    window: usize,
    #[arg(long, default_value_t = DEFAULT_ATTENTION_QUANTILE)]
    quantile: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct LocalizerArgs {
    #[arg(long, default_value_t = 500.0)]
    expansion: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_MIN_WEIGHT)]
    min_weight: u64,
    #[arg(long, default_value_t = 100)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl LocalizerArgs {
    fn params(&self) -> Result<(ExpansionFactor, DbscanParams, KMeansParams)> {
        let expansion = ExpansionFactor::new(self.expansion)?;
        let dbscan = DbscanParams {
            epsilon: self.epsilon,
            min_weight: self.min_weight,
        };
        dbscan.validate()?;
        let kmeans = KMeansParams {
            max_iters: self.max_iters,
            tol: self.tol,
            seed: self.seed,
            ..KMeansParams::default()
        };
        kmeans.validate()?;
        Ok((expansion, dbscan, kmeans))
    }
}

#[derive(Args)]
struct LocalizeArgs {
    #[arg(long)]
    density: PathBuf,
    /// `kmeans` or `isolated`.
    #[arg(long, default_value = "isolated")]
    method: String,
    #[command(flatten)]
    localizer: LocalizerArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Clone)]
struct EvalFlags {
    /// Comma-separated window sizes.
    #[arg(long, value_delimiter = ',', default_values_t = [10.0, 20.0, 40.0])]
    deltas: Vec<f64>,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    iou: f64,
}

impl EvalFlags {
    fn config(&self) -> Result<EvalConfig> {
        let cfg = EvalConfig {
            deltas: self.deltas.clone(),
            iou_threshold: self.iou,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    centers: PathBuf,
    #[arg(long)]
    annotations: PathBuf,
    #[command(flatten)]
    eval: EvalFlags,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 256)]
    width: usize,
    #[arg(long, default_value_t = 256)]
    height: usize,
    #[arg(long, default_value_t = 10)]
    min_heads: usize,
    #[arg(long, default_value_t = 50)]
    max_heads: usize,
    /// Gaussian-mixture components; 0 places heads uniformly.
    #[arg(long, default_value_t = 0)]
    components: usize,
    /// Standard deviation of each mixture component, in pixels.
    #[arg(long, default_value_t = 20.0)]
    spread: f64,
    /// Pixel noise standard deviation in density units.
    #[arg(long, default_value_t = 0.0, conflicts_with = "noise_peak_fraction")]
    noise: f64,
    /// Pixel noise standard deviation as a fraction of each scene's peak.
    #[arg(long)]
    noise_peak_fraction: Option<f64>,
    #[command(flatten)]
    sigma: SigmaArgs,
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Comma-separated subset of `kmeans,isolated`.
    #[arg(long, value_delimiter = ',', default_values_t = ["kmeans".to_string(), "isolated".to_string()])]
    methods: Vec<String>,
    #[command(flatten)]
    localizer: LocalizerArgs,
    #[command(flatten)]
    eval: EvalFlags,
    /// Per-trial rows are written here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct VizArgs {
    #[arg(long)]
    density: PathBuf,
    #[arg(long)]
    centers: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct LossesArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Predicted attention map (values in [0, 1]).
    #[arg(long, requires = "gt_attention")]
    pred_attention: Option<PathBuf>,
    /// Binary ground-truth attention map.
    #[arg(long, requires = "pred_attention")]
    gt_attention: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_SAL_LEVELS)]
    levels: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 4])]
    sizes: Vec<usize>,
    #[arg(long, default_value_t = DEFAULT_LAMBDA_ATT)]
    lambda_att: f64,
    /// SSIM dynamic range.
    #[arg(long, default_value_t = 1.0)]
    dynamic_range: f64,
    /// Adds curriculum-weighted MSE for this epoch.
    #[arg(long)]
    epoch: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_CURRICULUM_SLOPE)]
    curriculum_slope: f64,
    #[arg(long, default_value_t = DEFAULT_CURRICULUM_INTERCEPT)]
    curriculum_intercept: f64,
}

fn emit(value: &Value) -> Result<()> {
    let mut out = io::stdout().lock();
    writeln!(out, "{value}").map_err(|e| Error::io("<stdout>", e))
}

fn check_frame(expected: (usize, usize), got: (usize, usize)) -> Result<()> {
    if expected != got {
        return Err(crowdmap::core::Error::ShapeMismatch {
            index: 0,
            left: expected,
            right: got,
        }
        .into());
    }
    Ok(())
}

fn attention_to_map(att: &AttentionMap) -> Result<DensityMap> {
    let (w, h) = att.dims();
    Ok(DensityMap::new(w, h, att.values().to_vec())?)
}

fn map_to_attention(map: &DensityMap) -> Result<AttentionMap> {
    let (w, h) = map.dims();
    Ok(AttentionMap::new(w, h, map.values().to_vec())?)
}

fn cmd_gen(args: &GenArgs) -> Result<()> {
    let policy = args.sigma.policy()?;
    let ann = load_annotations(&args.annotations)?;
    let map = generate_density_map(&ann, &policy)?;
    write_density_map(&map, &args.out)?;
    emit(&json!({ "integral": map.integral(), "n": ann.len() }))
}

fn cmd_attention(args: &AttentionArgs) -> Result<()> {
    let att = match (&args.annotations, &args.density) {
        (Some(path), None) => generate_attention_window(&load_annotations(path)?, args.window)?,
        (None, Some(path)) => generate_attention_threshold(&read_density_map(path)?, args.quantile)?,
        _ => return Err(Error::Usage("pass exactly one of --annotations or --density".into())),
    };
    write_density_map(&attention_to_map(&att)?, &args.out)?;
    let foreground = att.values().iter().filter(|&&v| v > 0.0).count();
    emit(&json!({ "foreground": foreground, "pixels": att.values().len() }))
}

fn cmd_localize(args: &LocalizeArgs) -> Result<()> {
    let method = Method::parse(&args.method)?;
    let (expansion, dbscan, kmeans) = args.localizer.params()?;
    let map = read_density_map(&args.density)?;
    let result = bench::localize(method, &map, expansion, &dbscan, &kmeans)?;
    let doc = CentersDoc::new(&result, map.width(), map.height());
    save_centers(&doc, &args.out)?;
    emit(&json!({ "K": result.k(), "method": method.name() }))
}

fn cmd_eval(args: &EvalArgs) -> Result<()> {
    let cfg = args.eval.config()?;
    let doc = load_centers(&args.centers)?;
    let ann = load_annotations(&args.annotations)?;
    check_frame((ann.width(), ann.height()), (doc.width, doc.height))?;
    let result = doc.to_result()?;
    let reports = match_and_ap(&result, &ann, &cfg)?;
    let ap: Map<String, Value> = reports.iter().map(|r| (delta_key(r.delta), json!(r.ap))).collect();
    emit(&json!({ "ap": ap, "count_est": result.k(), "count_gt": ann.len() }))
}

fn cmd_bench(args: &BenchArgs) -> Result<()> {
    let methods = args.methods.iter().map(|m| Method::parse(m)).collect::<Result<Vec<_>>>()?;
    let (expansion, dbscan, kmeans) = args.localizer.params()?;
    let placement = match args.components {
        0 => Placement::Uniform,
        components => Placement::GaussianMixture {
            components,
            spread: args.spread,
        },
    };
    let noise = match args.noise_peak_fraction {
        Some(f) => NoiseLevel::PeakFraction(f),
        None => NoiseLevel::Absolute(args.noise),
    };
    let scene = SceneConfig {
        width: args.width,
        height: args.height,
        head_count: (args.min_heads, args.max_heads),
        placement,
        sigma: args.sigma.policy()?,
        noise,
        seed: args.localizer.seed,
    };
    scene.validate()?;
    let cfg = BenchConfig {
        scene,
        trials: args.trials,
        seed: args.localizer.seed,
        methods,
        expansion,
        dbscan,
        kmeans,
        eval: args.eval.config()?,
    };
    let rows = bench::run_trials(&cfg)?;
    if let Some(path) = &args.csv {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        bench::write_csv(&cfg, &rows, BufWriter::new(file))?;
    }
    emit(&serde_json::to_value(bench::summarize(&cfg, &rows)?)?)
}

fn cmd_viz(args: &VizArgs) -> Result<()> {
    let map = read_density_map(&args.density)?;
    let centers = match &args.centers {
        Some(path) => {
            let doc = load_centers(path)?;
            check_frame(map.dims(), (doc.width, doc.height))?;
            doc.to_result()?.centers
        }
        None => Vec::new(),
    };
    write_pgm(&map, &centers, &args.out)?;
    emit(&json!({ "width": map.width(), "height": map.height(), "centers": centers.len() }))
}

fn cmd_losses(args: &LossesArgs) -> Result<()> {
    let pred = read_density_map(&args.pred)?;
    let gt = read_density_map(&args.gt)?;
    check_frame(gt.dims(), pred.dims())?;
    let pair = (std::slice::from_ref(&pred), std::slice::from_ref(&gt));
    let mse = mse_loss(pair.0, pair.1)?;
    let msdlc = msdlc_loss(&pred, &gt, &args.sizes)?;
    let ssim = SsimConfig::new(SsimKernel::Gaussian { size: 11, sigma: 1.5 }, args.dynamic_range);
    let mut report = Map::new();
    report.insert("mse".into(), json!(mse));
    report.insert("sal_max".into(), json!(sal_loss(&pred, &gt, args.levels, Pooling::Max)?));
    report.insert("sal_avg".into(), json!(sal_loss(&pred, &gt, args.levels, Pooling::Avg)?));
    report.insert("msdlc".into(), json!(msdlc));
    report.insert("ssim".into(), json!(ssim_loss(&pred, &gt, &ssim)?));
    if let (Some(pa), Some(ga)) = (&args.pred_attention, &args.gt_attention) {
        let pa = map_to_attention(&read_density_map(pa)?)?;
        let ga = map_to_attention(&read_density_map(ga)?)?;
        let weights = LossWeights {
            lambda_att: args.lambda_att,
        };
        if !(weights.lambda_att.is_finite() && weights.lambda_att >= 0.0) {
            return Err(Error::Usage("--lambda-att must be finite and non-negative".into()));
        }
        let att = attention_loss(&pa, &ga)?;
        report.insert("attention".into(), json!(att));
        report.insert("total".into(), json!(combine_total(mse, msdlc, att, &weights)));
    }
    if let Some(epoch) = args.epoch {
        let sched = CurriculumSchedule {
            slope: args.curriculum_slope,
            intercept: args.curriculum_intercept,
        };
        let w = curriculum_weights(&gt, epoch, &sched)?;
        report.insert("weighted_mse".into(), json!(weighted_mse_loss(pair.0, pair.1, &[w])?));
    }
    emit(&Value::Object(report))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen(a) => cmd_gen(a),
        Command::Attention(a) => cmd_attention(a),
        Command::Localize(a) => cmd_localize(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Bench(a) => cmd_bench(a),
        Command::Viz(a) => cmd_viz(a),
        Command::Losses(a) => cmd_losses(a),
    }
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("crowdmap: {message}");
    println!("{}", json!({ "error": { "kind": kind, "message": message } }));
    ExitCode::FAILURE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let text = e.render().to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            return fail("usage", first.trim_start_matches("error: "));
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(e.kind(), &e.to_string()),
    }
}
