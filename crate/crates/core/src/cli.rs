//! Batch command-line front end.
//!
//! Every subcommand writes its artifacts under `--out` together with a
//! `run.json` reproducibility record (full arguments, seed, tool version).

use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::attacks::{
    apply_scale_plan, blind_attack, distribution_aware_attack, model_aware_attack, verify_model_aware_plan,
    DistributionAwareConfig, ModelAwareConfig, ScalePlan, DEFAULT_IOU_THRESHOLD, DEFAULT_JS_TOL,
};
use crate::dataset::{collect_instances, dataset_size_distribution, load_dataset, write_dataset, ClassFilter, Frame};
use crate::defense::{scar_materialize, scar_plan, DefenseConfig};
use crate::detector::{detector_from_spec, Detector};
use crate::error::{Error, Result};
use crate::eval::{asr, average_precision, evaluate_frames, recall, ApInterpolation, AsrDenominator, MetricsReport};
use crate::plot::{curve_svg, histogram_svg, pr_points, Series};
use crate::stats::{build_histogram, js_divergence, DEFAULT_BINS};

/// Overrides the exchange directory used by external detectors.
pub const DETECTOR_WORKDIR_ENV: &str = "SCAR_DETECTOR_WORKDIR";

#[derive(Debug, Parser, Serialize)]
#[command(
    name = "scar",
    version,
    about = "Scaling attacks and uniform-size defense for LiDAR detection datasets"
)]
pub struct Cli {
    /// Worker threads for frame-level parallelism (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand, Serialize)]
pub enum Command {
    /// Size histogram, JS sensitivity to uniform rescaling, and a plot.
    Stats(StatsArgs),
    /// Model-aware attack: smallest grid scale that breaks the detector.
    #[command(name = "attack-m")]
    AttackM(AttackMArgs),
    /// Distribution-aware attack: perturb the size histogram to a target JS.
    #[command(name = "attack-d")]
    AttackD(AttackDArgs),
    /// Blind attack: one constant scale for every instance.
    #[command(name = "attack-b")]
    AttackB(AttackBArgs),
    /// Apply a scale plan and write the scaled dataset.
    Apply(ApplyArgs),
    /// Uniform-size defense: write k scaled replicas of the dataset.
    Defend(DefendArgs),
    /// Recall, AP and (with an attacked set) ASR for a detector.
    Eval(EvalArgs),
    /// Re-check a model-aware plan against a detector.
    #[command(name = "verify-plan")]
    VerifyPlan(VerifyArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct Common {
    /// Dataset manifest (`id cloud label calib` per line).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "scar-out")]
    pub out: PathBuf,
    /// Class filter: a comma-separated list or `all`.
    #[arg(long, default_value = "Car")]
    pub class: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct DetectorArgs {
    /// `oracle`, `size-prior:lambda=<λ>[,mean=<l>x<w>x<h>]` or `external:<command>`.
    #[arg(long, default_value = "oracle")]
    pub detector: String,
    /// Seconds before an external detector call is abandoned.
    #[arg(long, default_value_t = 600.0)]
    pub detector_timeout: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct StatsArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Uniform rescalings to compare against the original distribution.
    #[arg(long, value_delimiter = ',', default_value = "0.8,0.9,1.1,1.2")]
    pub scales: Vec<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackMArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long, default_value_t = 0.2)]
    pub sigma_m: f64,
    #[arg(long, default_value_t = 0.01)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub thr: f64,
    /// Candidate frames per detector request.
    #[arg(long, default_value_t = 16)]
    pub batch: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackDArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub phi: f64,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_JS_TOL)]
    pub tol: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct AttackBArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, allow_hyphen_values = true)]
    pub sigma_b: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ApplyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub plan: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct DefendArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long, default_value_t = 0.4)]
    pub sigma: f64,
    /// Number of replicas k.
    #[arg(long, default_value_t = 5)]
    pub scales: usize,
    /// Mean instance volume in m³ (default: computed from the dataset).
    #[arg(long)]
    pub mean_size: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
pub struct EvalArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub detector: DetectorArgs,
    /// Manifest of the attacked dataset (same frames and annotations).
    #[arg(long, conflicts_with = "plan")]
    pub attacked: Option<PathBuf>,
    /// Scale plan applied in memory to produce the attacked dataset.
    #[arg(long)]
    pub plan: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_IOU_THRESHOLD)]
    pub thr: f64,
    /// AP interpolation points: 40 or 11.
    #[arg(long, default_value_t = 40)]
    pub ap_points: u32,
    /// ASR denominator: `detected` or `all`.
    #[arg(long, default_value = "detected")]
    pub asr_denominator: String,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub detector: DetectorArgs,
    #[arg(long)]
    pub plan: PathBuf,
    /// Grid bound (default: read from the plan).
    #[arg(long)]
    pub sigma_m: Option<f64>,
    /// Grid step (default: read from the plan).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long)]
    pub thr: Option<f64>,
    /// Check at most this many entries.
    #[arg(long)]
    pub max_entries: Option<usize>,
}

#[derive(Serialize)]
struct RunRecord<'a> {
    tool: &'static str,
    version: &'static str,
    seed: Option<u64>,
    config: &'a Cli,
}

fn create_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

fn write_text(p: &Path, text: &str) -> Result<()> {
    std::fs::write(p, text).map_err(|e| Error::io(p, e))
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Stats(a) => &a.common,
            Command::AttackM(a) => &a.common,
            Command::AttackD(a) => &a.common,
            Command::AttackB(a) => &a.common,
            Command::Apply(a) => &a.common,
            Command::Defend(a) => &a.common,
            Command::Eval(a) => &a.common,
            Command::VerifyPlan(a) => &a.common,
        }
    }
}

/// Mean `[l, w, h]` over matching annotations.
fn mean_dims(frames: &[Frame], classes: &ClassFilter) -> Option<[f64; 3]> {
    let inst = collect_instances(frames, classes);
    if inst.is_empty() {
        return None;
    }
    let mut acc = [0.0; 3];
    for i in &inst {
        let b = frames[i.frame_index].annotations[i.annotation_index].bbox;
        acc[0] += b.l;
        acc[1] += b.w;
        acc[2] += b.h;
    }
    Some(acc.map(|v| v / inst.len() as f64))
}

fn make_detector(
    args: &DetectorArgs,
    frames: &[Frame],
    classes: &ClassFilter,
    out: &Path,
) -> Result<Box<dyn Detector>> {
    let workdir = std::env::var_os(DETECTOR_WORKDIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| out.join("detector"));
    if !(args.detector_timeout > 0.0) {
        return Err(Error::InvalidArgument("detector timeout must be positive".into()));
    }
    detector_from_spec(
        &args.detector,
        mean_dims(frames, classes),
        &workdir,
        Duration::from_secs_f64(args.detector_timeout),
    )
}

/// Runs one parsed invocation.
pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.workers {
        if n == 0 {
            return Err(Error::InvalidArgument("--workers must be at least 1".into()));
        }
        // a pool may already exist when run is called repeatedly in-process
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let common = cli.command.common();
    create_dir(&common.out)?;
    let record = RunRecord {
        tool: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        seed: Some(common.seed),
        config: cli,
    };
    let json = serde_json::to_string_pretty(&record).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    write_text(&common.out.join("run.json"), &(json + "\n"))?;

    let classes = ClassFilter::parse(&common.class);
    let frames = load_dataset(&common.manifest)?;
    let out = &common.out;
    match &cli.command {
        Command::Stats(a) => stats(a, &frames, &classes, out),
        Command::AttackM(a) => {
            let det = make_detector(&a.detector, &frames, &classes, out)?;
            let cfg = ModelAwareConfig {
                sigma_m: a.sigma_m,
                step: a.step,
                iou_threshold: a.thr,
                classes,
                batch_size: a.batch,
            };
            let plan = model_aware_attack(&frames, det.as_ref(), &cfg)?.with_seed(a.common.seed);
            finish_plan(&plan, out)
        }
        Command::AttackD(a) => {
            let cfg = DistributionAwareConfig {
                phi: a.phi,
                bins: a.bins,
                seed: a.common.seed,
                tol: a.tol,
                classes,
            };
            let atk = distribution_aware_attack(&frames, &cfg)?;
            let svg = histogram_svg(
                "volume distribution",
                "volume (m³)",
                atk.original.edges(),
                &[
                    ("original", atk.original.masses()),
                    ("adversarial", atk.adversarial.masses()),
                ],
            );
            write_text(&out.join("distribution.svg"), &svg)?;
            finish_plan(&atk.plan, out)
        }
        Command::AttackB(a) => {
            let plan = blind_attack(&frames, a.sigma_b, &classes)?.with_seed(a.common.seed);
            finish_plan(&plan, out)
        }
        Command::Apply(a) => {
            let plan = ScalePlan::read(&a.plan)?;
            let scaled = apply_scale_plan(&frames, &plan)?;
            let manifest = write_dataset(&scaled, out)?;
            println!("wrote {} frames, manifest {}", scaled.len(), manifest.display());
            Ok(())
        }
        Command::Defend(a) => {
            let cfg = DefenseConfig {
                sigma: a.sigma,
                k_scales: a.scales,
                seed: a.common.seed,
                mean_size: a.mean_size,
                classes,
            };
            let plan = scar_plan(&frames, &cfg)?;
            let ds = scar_materialize(&frames, &plan, out)?;
            println!(
                "wrote {} adversarial frames ({} instances), manifest {}",
                ds.frames.len(),
                plan.entry_count(),
                ds.manifest.display()
            );
            Ok(())
        }
        Command::Eval(a) => eval(a, &frames, &classes, out),
        Command::VerifyPlan(a) => verify(a, &frames, &classes, out),
    }
}

fn finish_plan(plan: &ScalePlan, out: &Path) -> Result<()> {
    plan.write(&out.join("plan.txt"))?;
    println!(
        "{} plan: {} entries, {} attacked, mean |sigma| {:.6}",
        plan.attack,
        plan.len(),
        plan.attacked_count(),
        plan.mean_abs_sigma()
    );
    Ok(())
}

fn stats(a: &StatsArgs, frames: &[Frame], classes: &ClassFilter, out: &Path) -> Result<()> {
    let hist = dataset_size_distribution(frames, classes, a.bins)?;
    let volumes: Vec<f64> = collect_instances(frames, classes).iter().map(|i| i.volume).collect();
    let mut table = String::from("# bin_lo bin_hi mass\n");
    for (i, m) in hist.masses().iter().enumerate() {
        table.push_str(&format!("{} {} {}\n", hist.edges()[i], hist.edges()[i + 1], m));
    }
    write_text(&out.join("histogram.txt"), &table)?;

    // the scaled histograms share the original edges; mass outside the range
    // accumulates in the end bins
    let mut report = MetricsReport::default();
    report
        .param("bins", a.bins)
        .param("class", classes)
        .param("instances", volumes.len());
    let mut series_masses = Vec::new();
    for s in &a.scales {
        if !(*s > 0.0) {
            return Err(Error::InvalidArgument(format!("scale {s} must be positive")));
        }
        let scaled: Vec<f64> = volumes.iter().map(|v| v * s.powi(3)).collect();
        let h = build_histogram(&scaled, a.bins, Some(hist.range()))?;
        report.metric(&format!("js_scale_{s}"), js_divergence(&hist, &h)?);
        series_masses.push((format!("x{s}"), h.masses().to_vec()));
    }
    write_text(&out.join("metrics.txt"), &report.to_kv())?;
    print!("{}", report.to_table());
    let mut series: Vec<(&str, &[f64])> = vec![("original", hist.masses())];
    series.extend(series_masses.iter().map(|(l, m)| (l.as_str(), m.as_slice())));
    write_text(
        &out.join("histogram.svg"),
        &histogram_svg("annotation volume", "volume (m³)", hist.edges(), &series),
    )
}

fn eval(a: &EvalArgs, frames: &[Frame], classes: &ClassFilter, out: &Path) -> Result<()> {
    let mode = match a.ap_points {
        40 => ApInterpolation::Forty,
        11 => ApInterpolation::Eleven,
        n => return Err(Error::InvalidArgument(format!("--ap-points must be 40 or 11, got {n}"))),
    };
    let denom = match a.asr_denominator.as_str() {
        "detected" => AsrDenominator::PreviouslyDetected,
        "all" => AsrDenominator::AllInstances,
        other => return Err(Error::InvalidArgument(format!("unknown ASR denominator '{other}'"))),
    };
    let det = make_detector(&a.detector, frames, classes, out)?;
    let clean_preds = det.detect_batch(frames)?;
    let clean = evaluate_frames(frames, &clean_preds, a.thr, classes)?;

    let attacked_frames = match (&a.attacked, &a.plan) {
        (Some(m), _) => Some(load_dataset(m)?),
        (None, Some(p)) => Some(apply_scale_plan(frames, &ScalePlan::read(p)?)?),
        (None, None) => None,
    };

    let mut report = MetricsReport::default();
    report
        .param("detector", det.name())
        .param("iou_threshold", a.thr)
        .param("ap_points", a.ap_points)
        .param("class", classes);
    report.metric("recall_clean", recall(&clean)?);
    report.metric("ap_clean", average_precision(&clean, mode)?);
    let mut curves = vec![Series::new("clean", pr_points(&clean))];
    if let Some(att) = attacked_frames {
        let preds = det.detect_batch(&att)?;
        let attacked = evaluate_frames(&att, &preds, a.thr, classes)?;
        report.metric("recall_attacked", recall(&attacked)?);
        report.metric("ap_attacked", average_precision(&attacked, mode)?);
        report.metric("asr", asr(&clean, &attacked, denom)?);
        report.param("asr_denominator", &a.asr_denominator);
        curves.push(Series::new("attacked", pr_points(&attacked)));
    }
    write_text(&out.join("metrics.txt"), &report.to_kv())?;
    write_text(
        &out.join("pr_curve.svg"),
        &curve_svg("precision / recall", "recall", "precision", &curves),
    )?;
    print!("{}", report.to_table());
    Ok(())
}

fn plan_param(plan: &ScalePlan, key: &str) -> Result<f64> {
    plan.params
        .get(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| Error::InvalidArgument(format!("plan has no numeric '{key}'; pass it explicitly")))
}

fn verify(a: &VerifyArgs, frames: &[Frame], classes: &ClassFilter, out: &Path) -> Result<()> {
    let plan = ScalePlan::read(&a.plan)?;
    let cfg = ModelAwareConfig {
        sigma_m: a.sigma_m.map_or_else(|| plan_param(&plan, "sigma_m"), Ok)?,
        step: a.step.map_or_else(|| plan_param(&plan, "step"), Ok)?,
        iou_threshold: a
            .thr
            .unwrap_or_else(|| plan_param(&plan, "iou_threshold").unwrap_or(DEFAULT_IOU_THRESHOLD)),
        classes: classes.clone(),
        batch_size: 16,
    };
    let det = make_detector(&a.detector, frames, classes, out)?;
    let report = verify_model_aware_plan(frames, det.as_ref(), &plan, &cfg, a.max_entries)?;
    let mut text = format!("checked {}\nviolations {}\n", report.checked, report.violations.len());
    for v in &report.violations {
        text.push_str(v);
        text.push('\n');
    }
    write_text(&out.join("verify.txt"), &text)?;
    print!("{text}");
    if report.is_ok() {
        Ok(())
    } else {
        Err(Error::InvalidPlan(format!("{} violations", report.violations.len())))
    }
}
