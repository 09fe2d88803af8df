//! End-to-end wiring: backbone cost -> aggregation -> expansion ->
//! enhancement -> WTA, plus the ablation matrix, the density sweep, and the
//! run manifest.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::costvol::{
    census_cost, flip_orientation, sad_cost, sgm_aggregate, subpixel_refine, to_score, wta,
    CostVolume, Orientation,
};
use crate::enhancement::{apply_enhancement, EnhanceParams, Variant};
use crate::error::{Error, Result};
use crate::expansion::{expand, ExpansionParams, Guidance, GuidanceField};
use crate::imgio::cues_from_disparity;
use crate::metrics::{evaluate, EvalReport, DEFAULT_THRESHOLDS};
use crate::synth::{render, SceneSpec};
use crate::types::{DisparityMap, ImagePair, SparseCueSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backbone {
    Census,
    Sad,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SgmConfig {
    pub enabled: bool,
    pub p1: f32,
    pub p2: f32,
    pub paths: usize,
}

impl Default for SgmConfig {
    fn default() -> Self {
        SgmConfig {
            enabled: true,
            p1: 6.0,
            p2: 64.0,
            paths: 4,
        }
    }
}

/// Where the multiplicative enhancement sits relative to SGM. Post keeps the
/// enhancement the final arbiter at guided pixels (default); pre mirrors the
/// placement before regularization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnhanceStage {
    PreAggregation,
    PostAggregation,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub backbone: Backbone,
    pub window: usize,
    pub d_max: usize,
    pub subpixel: bool,
    pub seed: u64,
    pub enhance_stage: EnhanceStage,
    pub sgm: SgmConfig,
    pub expansion: ExpansionParams,
    pub enhancement: EnhanceParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            backbone: Backbone::Census,
            window: 5,
            d_max: 64,
            subpixel: false,
            seed: 0,
            enhance_stage: EnhanceStage::PostAggregation,
            sgm: SgmConfig::default(),
            expansion: ExpansionParams::default(),
            enhancement: preset("fs-psmnet").unwrap(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d_max < 1 {
            return Err(Error::Config("d_max must be >= 1".into()));
        }
        if self.window % 2 == 0 || self.window == 0 {
            return Err(Error::Config(format!("window {} must be odd", self.window)));
        }
        if self.sgm.enabled && !(self.sgm.p1 > 0.0 && self.sgm.p1 <= self.sgm.p2) {
            return Err(Error::Config("sgm penalties need 0 < p1 <= p2".into()));
        }
        if self.sgm.enabled && self.sgm.paths != 4 && self.sgm.paths != 8 {
            return Err(Error::Config("sgm paths must be 4 or 8".into()));
        }
        // the config text format stores integers as i64
        if self.seed > i64::MAX as u64 {
            return Err(Error::Config(format!("seed {} exceeds 2^63 - 1", self.seed)));
        }
        self.enhancement
            .validate()
            .map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Named enhancement presets from the published hyper-parameter table.
pub fn preset(name: &str) -> Result<EnhanceParams> {
    let p = match name {
        "f-default" => EnhanceParams {
            variant: Variant::F,
            h: 20.0,
            w: 1.0,
            v: 30.0,
            b: 0.0,
        },
        "fs-psmnet" => EnhanceParams {
            variant: Variant::Fs,
            h: 20.0,
            w: 1.0,
            v: 1.0,
            b: 0.1,
        },
        "fs-ganet" => EnhanceParams {
            variant: Variant::Fs,
            h: 100.0,
            w: 1.0,
            v: 10.0,
            b: 1.0,
        },
        "gsm-default" => EnhanceParams {
            variant: Variant::Gsm,
            h: 10.0,
            w: 1.0,
            v: 1.0,
            b: 0.0,
        },
        "none" => EnhanceParams {
            variant: Variant::None,
            h: 1.0,
            w: 1.0,
            v: 1.0,
            b: 0.0,
        },
        other => {
            return Err(Error::Config(format!(
                "unknown preset '{other}' (expected f-default, fs-psmnet, fs-ganet, gsm-default, none)"
            )))
        }
    };
    let mut p = p;
    if p.b == 0.0 && p.variant == Variant::Fs {
        p.b = 0.1;
    }
    Ok(p)
}

pub const PRESET_NAMES: [&str; 5] = ["f-default", "fs-psmnet", "fs-ganet", "gsm-default", "none"];

#[derive(Debug)]
pub struct RunResult {
    pub disparity: DisparityMap,
    pub report: Option<EvalReport>,
    /// Stage order actually executed, for the run log.
    pub stages: Vec<String>,
}

/// Guidance field with cue pixels only, used by variants that bypass
/// expansion (gsm, hard).
fn cue_only_field(width: usize, height: usize, cues: &SparseCueSet) -> GuidanceField {
    let mut field = GuidanceField::empty(width, height);
    for (idx, cue) in cues.cues.iter().enumerate() {
        field.cells[cue.y * width + cue.x] = Some(Guidance {
            d_src: cue.d,
            dist: 0.0,
            src: idx as u32,
        });
    }
    field
}

fn build_cost(pair: &ImagePair, config: &RunConfig) -> Result<CostVolume> {
    match config.backbone {
        Backbone::Census => census_cost(pair, config.d_max, config.window),
        Backbone::Sad => sad_cost(pair, config.d_max, config.window),
    }
}

/// Runs the configured pipeline on one stereo pair. `cues` may be empty, in
/// which case enhancement degenerates to the identity.
pub fn run(
    pair: &ImagePair,
    cues: Option<&SparseCueSet>,
    gt: Option<&DisparityMap>,
    config: &RunConfig,
) -> Result<RunResult> {
    config.validate()?;
    let mut stages = Vec::new();

    let mut cost = build_cost(pair, config)?;
    stages.push(format!("{:?}-cost window={}", config.backbone, config.window));

    let field = match (cues, config.enhancement.variant) {
        (None, _) | (_, Variant::None) => None,
        (Some(c), _) if c.is_empty() => None,
        (Some(c), Variant::Gsm | Variant::Hard) => {
            stages.push("cue-only guidance (no expansion)".into());
            Some(cue_only_field(pair.width(), pair.height(), c))
        }
        (Some(c), _) => {
            stages.push(format!(
                "expansion tau={} L={} shape={:?}",
                config.expansion.tau, config.expansion.arm_limit, config.expansion.shape
            ));
            Some(expand(&pair.left, c, &config.expansion)?)
        }
    };

    let enhance = |cost: &CostVolume, stages: &mut Vec<String>| -> Result<CostVolume> {
        let score = to_score(cost)?;
        match &field {
            Some(f) => {
                stages.push(format!("enhance variant={:?}", config.enhancement.variant));
                apply_enhancement(&score, f, &config.enhancement)
            }
            None => Ok(score),
        }
    };

    let final_score;
    if config.enhance_stage == EnhanceStage::PreAggregation {
        let enhanced = enhance(&cost, &mut stages)?;
        cost = flip_orientation(&enhanced, Orientation::Cost);
        if config.sgm.enabled {
            cost = sgm_aggregate(&cost, config.sgm.p1, config.sgm.p2, config.sgm.paths)?;
            stages.push(format!("sgm paths={}", config.sgm.paths));
        }
        final_score = to_score(&cost)?;
    } else {
        if config.sgm.enabled {
            cost = sgm_aggregate(&cost, config.sgm.p1, config.sgm.p2, config.sgm.paths)?;
            stages.push(format!("sgm paths={}", config.sgm.paths));
        }
        final_score = enhance(&cost, &mut stages)?;
    }

    let mut disparity = wta(&final_score);
    stages.push("wta".into());
    if config.subpixel {
        let as_cost = flip_orientation(&final_score, Orientation::Cost);
        disparity = subpixel_refine(&as_cost, &disparity)?;
        stages.push("subpixel".into());
    }

    let report = match gt {
        Some(gt) => Some(evaluate(&disparity, gt, &DEFAULT_THRESHOLDS)?),
        None => None,
    };
    Ok(RunResult {
        disparity,
        report,
        stages,
    })
}

/// The ablation matrix: everything fixed except the enhancement variant.
/// Rows follow the published ablation structure plus the hard-assignment
/// diagnostic.
pub const ABLATION_ROWS: [(&str, Variant); 6] = [
    ("baseline", Variant::None),
    ("gsm", Variant::Gsm),
    ("expansion", Variant::Expansion),
    ("f", Variant::F),
    ("fs", Variant::Fs),
    ("hard", Variant::Hard),
];

fn ablation_params(variant: Variant, base: &EnhanceParams) -> EnhanceParams {
    match variant {
        Variant::None => preset("none").unwrap(),
        // the published GSM parameters; expansion-only applies the same
        // Gaussian over the whole field
        Variant::Gsm | Variant::Expansion | Variant::Hard => EnhanceParams {
            variant,
            ..preset("gsm-default").unwrap()
        },
        Variant::F => preset("f-default").unwrap(),
        Variant::Fs => {
            if base.variant == Variant::Fs {
                *base
            } else {
                preset("fs-psmnet").unwrap()
            }
        }
    }
}

pub fn ablate(
    pair: &ImagePair,
    cues: &SparseCueSet,
    gt: &DisparityMap,
    base_config: &RunConfig,
) -> Result<Vec<(String, EvalReport)>> {
    let mut rows = Vec::new();
    for (name, variant) in ABLATION_ROWS {
        let mut config = base_config.clone();
        config.enhancement = ablation_params(variant, &base_config.enhancement);
        let result = run(pair, Some(cues), Some(gt), &config)?;
        rows.push((name.to_string(), result.report.expect("gt supplied")));
    }
    Ok(rows)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Cue coverage as a fraction of all pixels, strictly monotone.
    pub densities: Vec<f64>,
    pub repeats: usize,
    pub variants: Vec<Variant>,
    pub base: RunConfig,
    pub scenes: Vec<SceneSpec>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::Config("sweep repeats must be >= 1".into()));
        }
        if self.densities.len() < 2 {
            return Err(Error::Config("sweep needs at least two densities".into()));
        }
        let increasing = self.densities.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.densities.windows(2).all(|w| w[0] > w[1]);
        if !increasing && !decreasing {
            return Err(Error::Config("densities must be strictly monotone".into()));
        }
        if self.densities.iter().any(|&d| !(d > 0.0 && d <= 1.0)) {
            return Err(Error::Config("densities must lie in (0, 1]".into()));
        }
        if self.scenes.is_empty() {
            return Err(Error::Config("sweep needs at least one scene".into()));
        }
        self.base.validate()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub density: f64,
    pub variant: Variant,
    pub mean_avg_px: f64,
    pub std_avg_px: f64,
    pub runs: usize,
}

pub const SWEEP_CSV_HEADER: &str = "density,variant,mean_avg_px,std_avg_px,runs";

impl SweepRow {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.density,
            format!("{:?}", self.variant).to_lowercase(),
            self.mean_avg_px,
            self.std_avg_px,
            self.runs
        )
    }
}

/// Cue subsample at a target coverage fraction of all pixels, drawn from the
/// valid ground-truth pixels.
pub fn cues_at_density(gt: &DisparityMap, density: f64, seed: u64) -> Result<SparseCueSet> {
    let total = (gt.width * gt.height) as f64;
    let valid = gt.valid_count() as f64;
    let rate = ((density * total) / valid).min(1.0);
    cues_from_disparity(gt, rate, seed)
}

/// Density-robustness sweep: per (density, variant), fresh seeded cue
/// subsamples per repeat, aggregated to mean/std of the average pixel error.
pub fn sweep(spec: &SweepSpec) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let rendered: Vec<_> = spec
        .scenes
        .iter()
        .map(render)
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    for &density in &spec.densities {
        for &variant in &spec.variants {
            let mut errors = Vec::new();
            for (scene_idx, out) in rendered.iter().enumerate() {
                for repeat in 0..spec.repeats {
                    let cue_seed = spec
                        .base
                        .seed
                        .wrapping_add(1 + scene_idx as u64 * 1000 + repeat as u64);
                    let cues = cues_at_density(&out.gt, density, cue_seed)?;
                    let mut config = spec.base.clone();
                    config.enhancement = ablation_params(variant, &spec.base.enhancement);
                    let result = run(&out.pair, Some(&cues), Some(&out.gt), &config)?;
                    errors.push(result.report.expect("gt supplied").avg_px);
                }
            }
            let n = errors.len() as f64;
            let mean = errors.iter().sum::<f64>() / n;
            let var = errors.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / n;
            rows.push(SweepRow {
                density,
                variant,
                mean_avg_px: mean,
                std_avg_px: var.sqrt(),
                runs: errors.len(),
            });
        }
    }
    Ok(rows)
}

/// One JSON line recording everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool_version: &'static str,
    pub config_hash: String,
    pub config: RunConfig,
    pub inputs: Vec<ManifestInput>,
}

#[derive(Debug, Serialize)]
pub struct ManifestInput {
    pub path: String,
    pub sha256: String,
}

pub fn manifest_line(config: &RunConfig, input_paths: &[&Path]) -> Result<String> {
    let config_text = config.to_toml();
    let mut inputs = Vec::new();
    for path in input_paths {
        let bytes = std::fs::read(path).map_err(|e| Error::io(*path, e))?;
        inputs.push(ManifestInput {
            path: path.display().to_string(),
            sha256: hex_digest(&bytes),
        });
    }
    let manifest = Manifest {
        tool_version: env!("CARGO_PKG_VERSION"),
        config_hash: hex_digest(config_text.as_bytes()),
        config: config.clone(),
        inputs,
    };
    serde_json::to_string(&manifest).map_err(|e| Error::Config(e.to_string()))
}

fn hex_digest(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}
