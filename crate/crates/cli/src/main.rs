use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use proposalkit::anchors::{generate, AnchorSet};
use proposalkit::assignment::{assign_dual, AssignDiagnostics, AssignInputs};
use proposalkit::coco::{self, parse_json, write_json, CocoGroundTruth};
use proposalkit::config::PipelineConfig;
use proposalkit::eval::{evaluate, EvalConfig, Execution, GtDataset};
use proposalkit::postprocess::{nms, topk_proposals};
use proposalkit::synth::{self, SynthOptions};
use proposalkit::{BBox, Detection, ImageSize};

/// Score given to every anchor when `assign` runs without predictions.
const SYNTHETIC_SCORE: f64 = 0.7;

#[derive(Parser)]
#[command(
    name = "proposalkit",
    version,
    about = "Class-agnostic proposal tooling"
)]
struct Cli {
    /// Worker threads for per-image work.
    #[arg(long, global = true, env = "PROPOSALKIT_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score detections against COCO ground truth (AR@K, AP, AP@.5, AP@.75).
    Evaluate {
        /// COCO ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// COCO results JSON.
        #[arg(long)]
        det: PathBuf,
        /// Pipeline config JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Where to write the JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Detections per image used for AP.
        #[arg(long)]
        max_dets: Option<usize>,
        /// Evaluate at this single IoU threshold instead of .50:.95.
        #[arg(long)]
        iou_thr: Option<f64>,
    },
    /// Run the dual sampler on every image and report positives per GT.
    Assign {
        /// COCO ground-truth JSON.
        #[arg(long)]
        gt: PathBuf,
        /// Pipeline config JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Per-anchor predictions; defaults to score 0.7 with pred = anchor.
        #[arg(long)]
        pred: Option<PathBuf>,
        /// Where to write the JSON report; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a seeded synthetic dataset as gt.json and detections.json.
    Synth {
        /// RNG seed; equal seeds give byte-identical files.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Number of images.
        #[arg(long, default_value_t = 100)]
        n_images: usize,
        /// Box jitter as a fraction of size; 0 copies the ground truth.
        #[arg(long, default_value_t = 0.1)]
        jitter: f64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-image greedy NMS over a COCO results file.
    Nms {
        /// COCO results JSON.
        #[arg(long)]
        det: PathBuf,
        /// Pipeline config JSON; missing fields take defaults.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Suppression threshold; defaults to the config's nms_iou_thr.
        #[arg(long)]
        iou_thr: Option<f64>,
        /// Keep at most this many detections per image after NMS.
        #[arg(long)]
        max_dets: Option<usize>,
        /// Where to write the kept detections; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => Ok(PipelineConfig::load(p)?),
        None => Ok(PipelineConfig::default()),
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn run_evaluate(
    gt: &Path,
    det: &Path,
    config: Option<&Path>,
    out: Option<&Path>,
    max_dets: Option<usize>,
    iou_thr: Option<f64>,
) -> Result<()> {
    let mut cfg: EvalConfig = load_config(config)?.eval;
    if let Some(t) = iou_thr {
        cfg.iou_thresholds = vec![t];
    }
    if let Some(k) = max_dets {
        cfg.ap_max_dets = k;
    }
    cfg.validate()?;
    let dataset = coco::load_ground_truth(gt)?;
    let dets = coco::load_detections(det)?;
    let report = evaluate(&dataset, &dets, &cfg, Execution::Parallel)?;
    if let Some(path) = out {
        write_text(path, &report.to_json_pretty())?;
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let (header, values) = report.table_row();
    println!("{header}");
    println!("{values}");
    Ok(())
}

/// Per-anchor predictions for one image; `boxes` are `[x, y, w, h]`.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ImagePredictions {
    image_id: u64,
    scores: Vec<f64>,
    boxes: Vec<[f64; 4]>,
}

#[derive(Serialize)]
struct ImageAssignReport {
    image_id: u64,
    num_anchors: usize,
    #[serde(flatten)]
    diagnostics: AssignDiagnostics,
}

#[derive(Serialize)]
struct AssignSummary {
    images: usize,
    gts: usize,
    cls_positives: usize,
    reg_positives: usize,
    overlap: usize,
    overlap_fraction: f64,
}

#[derive(Serialize)]
struct AssignReport {
    summary: AssignSummary,
    images: Vec<ImageAssignReport>,
    warnings: Vec<String>,
}

type Predictions = BTreeMap<u64, (Vec<f64>, Vec<BBox>)>;

fn load_predictions(path: &Path) -> Result<Predictions> {
    let source = path.display().to_string();
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {source}"))?;
    let entries: Vec<ImagePredictions> = parse_json(&text, &source)?;
    let mut out = BTreeMap::new();
    for (i, e) in entries.into_iter().enumerate() {
        let boxes = e
            .boxes
            .iter()
            .enumerate()
            .map(|(j, b)| {
                BBox::from_xywh(b[0], b[1], b[2], b[3])
                    .with_context(|| format!("{source}: at `[{i}].boxes[{j}]`"))
            })
            .collect::<Result<Vec<_>>>()?;
        if out.insert(e.image_id, (e.scores, boxes)).is_some() {
            bail!("{source}: duplicate predictions for image {}", e.image_id);
        }
    }
    Ok(out)
}

fn assign_image(
    image_id: u64,
    size: (u32, u32),
    gts: &[BBox],
    cfg: &PipelineConfig,
    preds: Option<&(Vec<f64>, Vec<BBox>)>,
) -> Result<ImageAssignReport> {
    let img = ImageSize::new(size.0, size.1)?;
    let anchors: AnchorSet = generate(&cfg.pyramid.for_image(img)?);
    let (scores, boxes) = match preds {
        Some((s, b)) => (s.clone(), b.clone()),
        None => (
            vec![SYNTHETIC_SCORE; anchors.len()],
            anchors.boxes().to_vec(),
        ),
    };
    let inputs = AssignInputs {
        anchors: &anchors,
        gts,
        cls_scores: &scores,
        pred_boxes: &boxes,
    };
    let dual = assign_dual(&inputs, &cfg.cls_sampler, &cfg.reg_sampler)
        .with_context(|| format!("image {image_id}"))?;
    Ok(ImageAssignReport {
        image_id,
        num_anchors: anchors.len(),
        diagnostics: dual.diagnostics(),
    })
}

fn run_assign(
    gt: &Path,
    config: Option<&Path>,
    pred: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let dataset: GtDataset = coco::load_ground_truth(gt)?;
    let preds = pred.map(load_predictions).transpose()?;

    let mut per_image: BTreeMap<u64, Vec<BBox>> =
        dataset.images.keys().map(|&id| (id, Vec::new())).collect();
    for g in dataset.boxes.iter().filter(|g| !g.crowd) {
        match per_image.get_mut(&g.image_id) {
            Some(v) => v.push(g.bbox),
            None => bail!(
                "annotation {} refers to unknown image {}",
                g.gt_id,
                g.image_id
            ),
        }
    }

    let images: Vec<(u64, Vec<BBox>)> = per_image.into_iter().collect();
    let reports = images
        .par_iter()
        .map(|(id, gts)| {
            let p = match &preds {
                Some(m) => Some(
                    m.get(id)
                        .with_context(|| format!("no predictions for image {id}"))?,
                ),
                None => None,
            };
            assign_image(*id, dataset.images[id], gts, &cfg, p)
        })
        .collect::<Result<Vec<_>>>()?;

    let mut warnings: Vec<String> = Vec::new();
    for r in &reports {
        for w in &r.diagnostics.warnings {
            if !warnings.contains(w) {
                warnings.push(w.clone());
            }
        }
    }
    let cls: usize = reports.iter().map(|r| r.diagnostics.cls_positives).sum();
    let overlap: usize = reports.iter().map(|r| r.diagnostics.overlap).sum();
    let summary = AssignSummary {
        images: reports.len(),
        gts: reports.iter().map(|r| r.diagnostics.gts.len()).sum(),
        cls_positives: cls,
        reg_positives: reports.iter().map(|r| r.diagnostics.reg_positives).sum(),
        overlap,
        overlap_fraction: if cls == 0 {
            1.0
        } else {
            overlap as f64 / cls as f64
        },
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    let report = AssignReport {
        summary,
        images: reports,
        warnings,
    };
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    match out {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run_synth(seed: u64, n_images: usize, jitter: f64, out: &Path) -> Result<()> {
    if !(jitter.is_finite() && jitter >= 0.0) {
        bail!("--jitter must be finite and non-negative, got {jitter}");
    }
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let (gt, dets): (CocoGroundTruth, _) = synth::generate(&SynthOptions {
        seed,
        n_images,
        jitter,
        ..Default::default()
    });
    write_json(&out.join("gt.json"), &gt)?;
    write_json(&out.join("detections.json"), &dets)?;
    println!(
        "wrote {} images, {} boxes, {} detections to {}",
        gt.images.len(),
        gt.annotations.len(),
        dets.len(),
        out.display()
    );
    Ok(())
}

fn run_nms(
    det: &Path,
    config: Option<&Path>,
    iou_thr: Option<f64>,
    max_dets: Option<usize>,
    out: Option<&Path>,
) -> Result<()> {
    let cfg = load_config(config)?;
    let thr = iou_thr.unwrap_or(cfg.nms_iou_thr);
    if !(0.0..=1.0).contains(&thr) {
        bail!("--iou-thr must lie in [0, 1], got {thr}");
    }
    let dets = coco::load_detections(det)?;
    let mut by_image: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        by_image.entry(d.image_id).or_default().push(d);
    }
    let groups: Vec<Vec<Detection>> = by_image.into_values().collect();
    let kept: Vec<Detection> = groups
        .par_iter()
        .map(|g| {
            let k = nms(g, thr);
            match max_dets {
                Some(m) => topk_proposals(&k, m),
                None => k,
            }
        })
        .collect::<Vec<_>>()
        .concat();
    let results = coco::detections_to_results(&kept);
    match out {
        Some(p) => write_json(p, &results)?,
        None => println!("{}", serde_json::to_string(&results)?),
    }
    eprintln!("kept {} detections", kept.len());
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure thread pool")?;
    }
    match cli.command {
        Command::Evaluate {
            gt,
            det,
            config,
            out,
            max_dets,
            iou_thr,
        } => run_evaluate(
            &gt,
            &det,
            config.as_deref(),
            out.as_deref(),
            max_dets,
            iou_thr,
        ),
        Command::Assign {
            gt,
            config,
            pred,
            out,
        } => run_assign(&gt, config.as_deref(), pred.as_deref(), out.as_deref()),
        Command::Synth {
            seed,
            n_images,
            jitter,
            out,
        } => run_synth(seed, n_images, jitter, &out),
        Command::Nms {
            det,
            config,
            iou_thr,
            max_dets,
            out,
        } => run_nms(&det, config.as_deref(), iou_thr, max_dets, out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
