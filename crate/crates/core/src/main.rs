use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use guided_stereo::enhancement::Variant;
use guided_stereo::error::{Error, Result};
use guided_stereo::expansion::{expand, ExpansionParams, RegionShape};
use guided_stereo::imgio::{
    load_cues_csv, load_disparity, load_image, save_disparity, save_image, DisparityFormat,
};
use guided_stereo::metrics::{evaluate, DEFAULT_THRESHOLDS};
use guided_stereo::pipeline::{
    ablate, manifest_line, preset, run, sweep, EnhanceStage, RunConfig, SweepSpec,
    SWEEP_CSV_HEADER,
};
use guided_stereo::synth::{render, SceneSpec};
use guided_stereo::types::{Cue, DisparityMap, ImagePair, SparseCueSet};

#[derive(Parser)]
#[command(
    name = "guided-stereo",
    about = "Sparse-cue guided stereo matching: expansion + distance-weighted cost-volume enhancement",
    version
)]
struct Cli {
    /// Worker threads (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Match a stereo pair, optionally guided by sparse cues.
    Match(MatchArgs),
    /// Expand sparse cues into a dense guided disparity map.
    Expand(ExpandArgs),
    /// Evaluate a predicted disparity map against ground truth.
    Eval(EvalArgs),
    /// Run the full ablation matrix on one input.
    Ablate(AblateArgs),
    /// Density-robustness sweep over synthetic scenes.
    Sweep(SweepArgs),
    /// Render a synthetic stereo pair with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Args)]
struct ConfigArgs {
    /// Run configuration as TOML; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Enhancement preset: f-default, fs-psmnet, fs-ganet, gsm-default, none.
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    d_max: Option<usize>,
    #[arg(long)]
    window: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    subpixel: bool,
    #[arg(long)]
    no_sgm: bool,
    /// pre_aggregation or post_aggregation.
    #[arg(long)]
    enhance_stage: Option<String>,
    #[arg(long)]
    tau: Option<u8>,
    #[arg(long)]
    arm_limit: Option<usize>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
                RunConfig::from_toml(&text)?
            }
            None => RunConfig::default(),
        };
        if let Some(name) = &self.preset {
            config.enhancement = preset(name)?;
        }
        if let Some(d_max) = self.d_max {
            config.d_max = d_max;
        }
        if let Some(window) = self.window {
            config.window = window;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if self.subpixel {
            config.subpixel = true;
        }
        if self.no_sgm {
            config.sgm.enabled = false;
        }
        if let Some(stage) = &self.enhance_stage {
            config.enhance_stage = match stage.as_str() {
                "pre_aggregation" => EnhanceStage::PreAggregation,
                "post_aggregation" => EnhanceStage::PostAggregation,
                other => return Err(Error::Config(format!("unknown enhance stage '{other}'"))),
            };
        }
        if let Some(tau) = self.tau {
            config.expansion.tau = tau;
        }
        if let Some(limit) = self.arm_limit {
            config.expansion.arm_limit = limit;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct MatchArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    /// Sparse cues: CSV (x,y,d) or KITTI 16-bit PNG.
    #[arg(long)]
    cues: Option<PathBuf>,
    #[arg(long)]
    gt: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Manifest path; defaults to <out>.manifest.jsonl.
    #[arg(long)]
    manifest: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct ExpandArgs {
    #[arg(long)]
    image: PathBuf,
    #[arg(long)]
    cues: PathBuf,
    /// Expanded disparity output (.pfm or .png).
    #[arg(long)]
    out: PathBuf,
    /// Optional Euclidean-distance map output (PFM).
    #[arg(long)]
    dist_map: Option<PathBuf>,
    #[arg(long, default_value_t = 15)]
    tau: u8,
    #[arg(long, default_value_t = 30)]
    arm_limit: usize,
    /// cross or square.
    #[arg(long, default_value = "cross")]
    shape: String,
    #[arg(long, default_value_t = 256)]
    d_max: usize,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Append the report as a CSV row to this file.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Print the report as one JSON line instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    left: PathBuf,
    #[arg(long)]
    right: PathBuf,
    #[arg(long)]
    cues: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// CSV output path for the ablation table.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep specification as TOML.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    /// Write a default sweep spec to --spec's path and exit.
    #[arg(long)]
    emit_default: bool,
}

#[derive(Args)]
struct SynthArgs {
    /// Scene specification as TOML.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Output directory: left.pgm, right.pgm, gt.pfm, occlusion.pgm.
    #[arg(long)]
    out_dir: PathBuf,
    /// Write a default scene spec to --spec's path and exit.
    #[arg(long)]
    emit_default: bool,
}

fn main() {
    let cli = Cli::parse();
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .expect("thread pool configured once at startup");
    }
    if let Err(err) = dispatch(cli.command) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Match(args) => cmd_match(args),
        Command::Expand(args) => cmd_expand(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Ablate(args) => cmd_ablate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Synth(args) => cmd_synth(args),
    }
}

fn disparity_format_for(path: &Path) -> Result<DisparityFormat> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("pfm") => Ok(DisparityFormat::Pfm),
        Some("png") => Ok(DisparityFormat::KittiPng),
        other => Err(Error::UnsupportedFormat(format!(
            "cannot infer disparity format from extension {other:?} (use .pfm or .png)"
        ))),
    }
}

fn load_cues(path: &Path, width: usize, height: usize, d_max: usize) -> Result<SparseCueSet> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => load_cues_csv(path, width, height, d_max),
        Some("png") => {
            let map = load_disparity(path, DisparityFormat::KittiPng)?;
            if map.width != width || map.height != height {
                return Err(Error::DimensionMismatch(format!(
                    "cue map {}x{} vs image {width}x{height}",
                    map.width, map.height
                )));
            }
            let mut cues = Vec::new();
            for y in 0..height {
                for x in 0..width {
                    let d = map.get(x, y);
                    if DisparityMap::is_valid(d) {
                        cues.push(Cue { x, y, d });
                    }
                }
            }
            SparseCueSet::new(cues, width, height, d_max)
        }
        other => Err(Error::UnsupportedFormat(format!(
            "cannot infer cue format from extension {other:?} (use .csv or .png)"
        ))),
    }
}

/// Writes the disparity via a temporary file in the same directory so readers
/// never observe a partial file.
fn save_disparity_atomic(map: &DisparityMap, path: &Path) -> Result<()> {
    let format = disparity_format_for(path)?;
    let tmp = path.with_extension(format!(
        "tmp.{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("pfm")
    ));
    save_disparity(map, &tmp, format)?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

fn cmd_match(args: MatchArgs) -> Result<()> {
    let config = args.config.build()?;
    let left = load_image(&args.left)?;
    let right = load_image(&args.right)?;
    let pair = ImagePair::new(left, right)?;

    let cues = match &args.cues {
        Some(path) => Some(load_cues(path, pair.width(), pair.height(), config.d_max)?),
        None => None,
    };
    let gt = match &args.gt {
        Some(path) => Some(load_disparity(path, disparity_format_for(path)?)?),
        None => None,
    };

    let result = run(&pair, cues.as_ref(), gt.as_ref(), &config)?;
    save_disparity_atomic(&result.disparity, &args.out)?;

    let mut input_paths = vec![args.left.as_path(), args.right.as_path()];
    if let Some(p) = &args.cues {
        input_paths.push(p);
    }
    if let Some(p) = &args.gt {
        input_paths.push(p);
    }
    let manifest_path = args
        .manifest
        .unwrap_or_else(|| append_ext(&args.out, "manifest.jsonl"));
    append_line(&manifest_path, &manifest_line(&config, &input_paths)?)?;

    eprintln!("stages: {}", result.stages.join(" -> "));
    if let Some(report) = result.report {
        print!("{}", report.table());
    }
    Ok(())
}

fn append_ext(path: &Path, ext: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn append_line(path: &Path, line: &str) -> Result<()> {
    use std::io::Write;
    let mut f = fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map_err(|e| Error::io(path, e))?;
    writeln!(f, "{line}").map_err(|e| Error::io(path, e))
}

fn cmd_expand(args: ExpandArgs) -> Result<()> {
    let image = load_image(&args.image)?;
    let cues = load_cues(&args.cues, image.width, image.height, args.d_max)?;
    let shape = match args.shape.as_str() {
        "cross" => RegionShape::Cross,
        "square" => RegionShape::Square,
        other => return Err(Error::Config(format!("unknown region shape '{other}'"))),
    };
    let params = ExpansionParams {
        tau: args.tau,
        arm_limit: args.arm_limit,
        shape,
        ..ExpansionParams::default()
    };
    let field = expand(&image, &cues, &params)?;

    let mut disp = DisparityMap::invalid(image.width, image.height);
    let mut dist = DisparityMap::invalid(image.width, image.height);
    for (i, cell) in field.cells.iter().enumerate() {
        if let Some(g) = cell {
            disp.data[i] = g.d_src;
            dist.data[i] = g.dist;
        }
    }
    save_disparity_atomic(&disp, &args.out)?;
    if let Some(path) = &args.dist_map {
        save_disparity(&dist, path, DisparityFormat::Pfm)?;
    }
    eprintln!(
        "expanded {} cues to {} guided pixels ({:.2}% coverage)",
        cues.len(),
        field.occupancy(),
        100.0 * field.occupancy() as f64 / (image.width * image.height) as f64
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let pred = load_disparity(&args.pred, disparity_format_for(&args.pred)?)?;
    let gt = load_disparity(&args.gt, disparity_format_for(&args.gt)?)?;
    let report = evaluate(&pred, &gt, &DEFAULT_THRESHOLDS)?;
    if args.json {
        println!(
            "{}",
            serde_json::to_string(&report).map_err(|e| Error::Config(e.to_string()))?
        );
    } else {
        print!("{}", report.table());
    }
    if let Some(path) = &args.csv {
        if !path.exists() {
            append_line(path, &report.csv_header())?;
        }
        append_line(path, &report.csv_row())?;
    }
    Ok(())
}

fn cmd_ablate(args: AblateArgs) -> Result<()> {
    let config = args.config.build()?;
    let left = load_image(&args.left)?;
    let right = load_image(&args.right)?;
    let pair = ImagePair::new(left, right)?;
    let cues = load_cues(&args.cues, pair.width(), pair.height(), config.d_max)?;
    let gt = load_disparity(&args.gt, disparity_format_for(&args.gt)?)?;

    let rows = ablate(&pair, &cues, &gt, &config)?;
    println!("{:<12} {:>10} {:>8} {:>8} {:>8} {:>8}", "variant", "avg_px", ">2px", ">3px", ">4px", ">5px");
    for (name, report) in &rows {
        println!(
            "{:<12} {:>10.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            name,
            report.avg_px,
            report.err_rate[&2],
            report.err_rate[&3],
            report.err_rate[&4],
            report.err_rate[&5]
        );
    }
    if let Some(path) = &args.csv {
        append_line(path, "variant,avg_px,rate_2,rate_3,rate_4,rate_5,n_valid")?;
        for (name, report) in &rows {
            append_line(path, &format!("{name},{}", report.csv_row()))?;
        }
    }
    Ok(())
}

fn default_sweep_spec() -> SweepSpec {
    SweepSpec {
        densities: vec![0.03, 0.01, 0.005, 0.001],
        repeats: 5,
        variants: vec![Variant::Gsm, Variant::Fs],
        base: RunConfig::default(),
        scenes: (0..4)
            .map(|i| guided_stereo::synth::two_layer_scene(96, 72, 32, 4.0, 14.0, 8.0, 100 + i))
            .collect(),
    }
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    if args.emit_default {
        let spec = default_sweep_spec();
        let text = toml::to_string_pretty(&spec).map_err(|e| Error::Config(e.to_string()))?;
        let path = args
            .spec
            .ok_or_else(|| Error::Config("--emit-default needs --spec <path>".into()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        eprintln!("wrote default sweep spec to {}", path.display());
        return Ok(());
    }
    let spec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => default_sweep_spec(),
    };
    let rows = sweep(&spec)?;
    let mut out = String::from(SWEEP_CSV_HEADER);
    out.push('\n');
    for row in &rows {
        out.push_str(&row.csv_row());
        out.push('\n');
    }
    fs::write(&args.out, &out).map_err(|e| Error::io(&args.out, e))?;
    eprint!("{out}");
    Ok(())
}

fn cmd_synth(args: SynthArgs) -> Result<()> {
    let default_scene = || guided_stereo::synth::two_layer_scene(128, 96, 32, 4.0, 14.0, 8.0, 1);
    if args.emit_default {
        let path = args
            .spec
            .ok_or_else(|| Error::Config("--emit-default needs --spec <path>".into()))?;
        let text =
            toml::to_string_pretty(&default_scene()).map_err(|e| Error::Config(e.to_string()))?;
        fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        eprintln!("wrote default scene spec to {}", path.display());
        return Ok(());
    }
    let spec: SceneSpec = match &args.spec {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        }
        None => default_scene(),
    };
    let out = render(&spec)?;
    fs::create_dir_all(&args.out_dir).map_err(|e| Error::io(&args.out_dir, e))?;
    save_image(&out.pair.left, &args.out_dir.join("left.pgm"))?;
    save_image(&out.pair.right, &args.out_dir.join("right.pgm"))?;
    save_disparity(&out.gt, &args.out_dir.join("gt.pfm"), DisparityFormat::Pfm)?;
    save_image(&out.occlusion, &args.out_dir.join("occlusion.pgm"))?;
    eprintln!("wrote scene to {}", args.out_dir.display());
    Ok(())
}
