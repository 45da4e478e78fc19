//! Class-agnostic COCO-protocol box evaluation.
//!
//! Every annotation is treated as one "object" class. Per image, detections
//! are ranked by score and greedily matched to ground truth at each IoU
//! threshold; crowd regions absorb otherwise unmatched detections without
//! counting them. The per-image results are then reduced to
//! AR@{1,10,100,300,1000} and AP / AP@.5 / AP@.75 with 101-point
//! interpolation, following the COCO reference evaluator.

use std::collections::{BTreeMap, BTreeSet, HashSet};

use rayon::prelude::*;
use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::geometry::BBox;
use crate::postprocess::{score_order, Detection};

/// Sentinel for metrics that are undefined because there is no ground truth.
pub const UNDEFINED_METRIC: f64 = -1.0;

const RECALL_POINTS: usize = 101;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthBox {
    pub bbox: BBox,
    pub image_id: u64,
    pub gt_id: u64,
    pub crowd: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub iou_thresholds: Vec<f64>,
    pub recall_budgets: Vec<usize>,
    /// Per-image detection cap used for AP.
    pub ap_max_dets: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            iou_thresholds: (0..10).map(|i| (50 + 5 * i) as f64 / 100.0).collect(),
            recall_budgets: vec![1, 10, 100, 300, 1000],
            ap_max_dets: 100,
        }
    }
}

impl EvalConfig {
    /// Single-threshold variant, e.g. AR at IoU 0.5 only.
    pub fn single_threshold(thr: f64) -> Self {
        Self {
            iou_thresholds: vec![thr],
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("")
    }

    pub fn validate_at(&self, prefix: &str) -> Result<()> {
        let t = &self.iou_thresholds;
        if t.is_empty() {
            return Err(Error::config(
                format!("{prefix}iou_thresholds"),
                "must not be empty",
            ));
        }
        if t.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) || t.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                format!("{prefix}iou_thresholds"),
                "must be strictly increasing within (0, 1]",
            ));
        }
        let b = &self.recall_budgets;
        if b.is_empty() || b[0] == 0 || b.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                format!("{prefix}recall_budgets"),
                "must be non-empty, positive and strictly increasing",
            ));
        }
        if self.ap_max_dets == 0 {
            return Err(Error::config(
                format!("{prefix}ap_max_dets"),
                "must be at least 1",
            ));
        }
        Ok(())
    }

    fn max_dets_needed(&self) -> usize {
        self.recall_budgets
            .iter()
            .copied()
            .chain([self.ap_max_dets])
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MatchOutcome {
    TruePositive {
        gt_id: u64,
    },
    FalsePositive,
    /// Matched a crowd region; neither rewarded nor penalised.
    Ignored,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct DetMatch {
    /// Index into the detection slice passed to [`match_image`].
    pub det_index: usize,
    pub outcome: MatchOutcome,
}

/// Detections and ground truth of one image, ranked and with IoUs
/// precomputed, ready to be matched at any threshold.
struct PreparedImage {
    /// Detection indices in score order, truncated to the cap.
    det_order: Vec<usize>,
    scores: Vec<f64>,
    /// GT ids, non-crowd first (stable).
    gt_ids: Vec<u64>,
    gt_crowd: Vec<bool>,
    /// `ious[d * num_gts + g]` in the orders above.
    ious: Vec<f64>,
}

impl PreparedImage {
    fn new(dets: &[Detection], gts: &[GroundTruthBox], max_dets: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(gts.len());
        for g in gts {
            if !seen.insert(g.gt_id) {
                return Err(Error::DuplicateGtId {
                    image_id: g.image_id,
                    gt_id: g.gt_id,
                });
            }
        }
        let mut det_order = score_order(dets);
        det_order.truncate(max_dets);

        let gt_sorted: Vec<&GroundTruthBox> = gts
            .iter()
            .filter(|g| !g.crowd)
            .chain(gts.iter().filter(|g| g.crowd))
            .collect();

        let mut ious = Vec::with_capacity(det_order.len() * gt_sorted.len());
        for &d in &det_order {
            let db = &dets[d].bbox;
            for g in &gt_sorted {
                ious.push(overlap(db, &g.bbox, g.crowd));
            }
        }
        Ok(Self {
            scores: det_order.iter().map(|&d| dets[d].score).collect(),
            det_order,
            gt_ids: gt_sorted.iter().map(|g| g.gt_id).collect(),
            gt_crowd: gt_sorted.iter().map(|g| g.crowd).collect(),
            ious,
        })
    }

    fn num_gts(&self) -> usize {
        self.gt_ids.len()
    }

    fn num_non_crowd(&self) -> usize {
        self.gt_crowd.iter().filter(|c| !**c).count()
    }

    /// Greedy matching at one threshold, in detection rank order.
    fn match_at(&self, iou_thr: f64) -> Vec<MatchOutcome> {
        let ng = self.num_gts();
        let mut gt_taken = vec![false; ng];
        let mut out = Vec::with_capacity(self.det_order.len());
        for d in 0..self.det_order.len() {
            let row = &self.ious[d * ng..(d + 1) * ng];
            let mut best_iou = iou_thr.min(1.0 - 1e-10);
            let mut best: Option<usize> = None;
            for g in 0..ng {
                if gt_taken[g] && !self.gt_crowd[g] {
                    continue;
                }
                // Once a real GT is matched, crowd regions cannot take over.
                if matches!(best, Some(m) if !self.gt_crowd[m]) && self.gt_crowd[g] {
                    break;
                }
                if row[g] < best_iou {
                    continue;
                }
                best_iou = row[g];
                best = Some(g);
            }
            out.push(match best {
                None => MatchOutcome::FalsePositive,
                Some(g) if self.gt_crowd[g] => MatchOutcome::Ignored,
                Some(g) => {
                    gt_taken[g] = true;
                    MatchOutcome::TruePositive {
                        gt_id: self.gt_ids[g],
                    }
                }
            });
        }
        out
    }
}

/// Box IoU, or intersection over detection area for crowd regions.
fn overlap(det: &BBox, gt: &BBox, crowd: bool) -> f64 {
    if crowd {
        let a = det.area();
        if a <= 0.0 {
            0.0
        } else {
            det.intersection_area(gt) / a
        }
    } else {
        crate::geometry::iou(det, gt)
    }
}

/// Matches one image's detections (up to `max_dets`, by descending score,
/// ties by input order) against its ground truth at `iou_thr`.
pub fn match_image(
    dets: &[Detection],
    gts: &[GroundTruthBox],
    iou_thr: f64,
    max_dets: usize,
) -> Result<Vec<DetMatch>> {
    let prepared = PreparedImage::new(dets, gts, max_dets)?;
    Ok(prepared
        .match_at(iou_thr)
        .into_iter()
        .zip(&prepared.det_order)
        .map(|(outcome, &det_index)| DetMatch { det_index, outcome })
        .collect())
}

/// Ranked per-image match results at every configured threshold.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageEval {
    pub image_id: u64,
    pub num_gt: usize,
    pub num_crowd: usize,
    pub num_dets: usize,
    /// Scores of the ranked, truncated detections.
    pub scores: Vec<f64>,
    /// `outcomes[t][rank]`.
    pub outcomes: Vec<Vec<MatchOutcome>>,
}

impl ImageEval {
    fn true_positives(&self, t: usize, budget: usize) -> usize {
        self.outcomes[t]
            .iter()
            .take(budget)
            .filter(|o| matches!(o, MatchOutcome::TruePositive { .. }))
            .count()
    }
}

pub fn evaluate_image(
    image_id: u64,
    dets: &[Detection],
    gts: &[GroundTruthBox],
    cfg: &EvalConfig,
) -> Result<ImageEval> {
    let prepared = PreparedImage::new(dets, gts, cfg.max_dets_needed())?;
    let outcomes = cfg
        .iou_thresholds
        .iter()
        .map(|&t| prepared.match_at(t))
        .collect();
    let num_gt = prepared.num_non_crowd();
    Ok(ImageEval {
        image_id,
        num_gt,
        num_crowd: prepared.num_gts() - num_gt,
        num_dets: dets.len(),
        scores: prepared.scores,
        outcomes,
    })
}

fn total_gt(images: &[ImageEval]) -> usize {
    images.iter().map(|i| i.num_gt).sum()
}

/// Recall at each threshold with at most `budget` detections per image.
pub fn recall_per_threshold(images: &[ImageEval], budget: usize, cfg: &EvalConfig) -> Vec<f64> {
    let npig = total_gt(images);
    (0..cfg.iou_thresholds.len())
        .map(|t| {
            if npig == 0 {
                UNDEFINED_METRIC
            } else {
                let tp: usize = images.iter().map(|i| i.true_positives(t, budget)).sum();
                tp as f64 / npig as f64
            }
        })
        .collect()
}

/// AR@budget: recall averaged over the IoU thresholds; -1 with no ground truth.
pub fn average_recall(images: &[ImageEval], budget: usize, cfg: &EvalConfig) -> f64 {
    mean_defined(&recall_per_threshold(images, budget, cfg))
}

/// Interpolated AP at each threshold, using the first `cfg.ap_max_dets`
/// detections per image.
pub fn precision_per_threshold(images: &[ImageEval], cfg: &EvalConfig) -> Vec<f64> {
    let npig = total_gt(images);
    if npig == 0 {
        return vec![UNDEFINED_METRIC; cfg.iou_thresholds.len()];
    }
    // Dataset-wide ranking: score descending, then image order, then rank.
    let mut ranked: Vec<(f64, usize, usize)> = images
        .iter()
        .enumerate()
        .flat_map(|(i, img)| {
            img.scores
                .iter()
                .take(cfg.ap_max_dets)
                .enumerate()
                .map(move |(r, &s)| (s, i, r))
        })
        .collect();
    ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    (0..cfg.iou_thresholds.len())
        .map(|t| {
            let mut tp = 0usize;
            let mut fp = 0usize;
            let mut recall = Vec::with_capacity(ranked.len());
            let mut precision = Vec::with_capacity(ranked.len());
            for &(_, i, r) in &ranked {
                match images[i].outcomes[t][r] {
                    MatchOutcome::TruePositive { .. } => tp += 1,
                    MatchOutcome::FalsePositive => fp += 1,
                    MatchOutcome::Ignored => continue,
                }
                recall.push(tp as f64 / npig as f64);
                precision.push(tp as f64 / (tp + fp) as f64);
            }
            interpolated_ap(&recall, &mut precision)
        })
        .collect()
}

/// 101-point interpolated area under a PR curve. `precision` is made
/// monotone (non-increasing) in place.
fn interpolated_ap(recall: &[f64], precision: &mut [f64]) -> f64 {
    for i in (1..precision.len()).rev() {
        if precision[i] > precision[i - 1] {
            precision[i - 1] = precision[i];
        }
    }
    let mut sum = 0.0;
    for k in 0..RECALL_POINTS {
        let r = k as f64 / (RECALL_POINTS - 1) as f64;
        let idx = recall.partition_point(|&x| x < r);
        if idx < precision.len() {
            sum += precision[idx];
        }
    }
    sum / RECALL_POINTS as f64
}

fn mean_defined(values: &[f64]) -> f64 {
    let defined: Vec<f64> = values
        .iter()
        .copied()
        .filter(|v| *v > UNDEFINED_METRIC)
        .collect();
    if defined.is_empty() {
        UNDEFINED_METRIC
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// AP averaged over thresholds, plus the per-threshold values.
pub fn average_precision(images: &[ImageEval], cfg: &EvalConfig) -> (f64, Vec<(f64, f64)>) {
    let per = precision_per_threshold(images, cfg);
    let ap = mean_defined(&per);
    (ap, cfg.iou_thresholds.iter().copied().zip(per).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Execution {
    Sequential,
    Parallel,
}

/// Ground truth for a dataset: the declared images and their annotations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GtDataset {
    /// Image ids declared in the file, with their sizes.
    pub images: BTreeMap<u64, (u32, u32)>,
    pub boxes: Vec<GroundTruthBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImageSummary {
    pub image_id: u64,
    pub num_gt: usize,
    pub num_crowd: usize,
    pub num_dets: usize,
    /// True positives among the top `ap_max_dets` detections, per threshold.
    pub true_positives: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub ar_at: BTreeMap<usize, f64>,
    pub ap: f64,
    /// `(threshold, AP)` for every configured threshold.
    pub ap_at: Vec<(f64, f64)>,
    pub num_images: usize,
    pub num_gt: usize,
    pub num_crowd: usize,
    pub num_detections: usize,
    pub images: Vec<ImageSummary>,
    pub warnings: Vec<String>,
}

/// `0.5 -> ".5"`, `0.75 -> ".75"`.
fn threshold_label(t: f64) -> String {
    let s = format!("{t}");
    match s.strip_prefix('0') {
        Some(rest) if rest.starts_with('.') => rest.to_string(),
        _ => s,
    }
}

impl EvalReport {
    pub fn ap_at(&self, thr: f64) -> Option<f64> {
        self.ap_at
            .iter()
            .find(|(t, _)| (t - thr).abs() < 1e-12)
            .map(|(_, v)| *v)
    }

    /// Metric columns in table order: AR@100, AP, AP@.5, AP@.75, AR@1, AR@10,
    /// then any remaining recall budgets in increasing order.
    pub fn columns(&self) -> Vec<(String, f64)> {
        let mut cols = Vec::new();
        let mut used = BTreeSet::new();
        let mut push_ar = |cols: &mut Vec<(String, f64)>, k: usize| {
            if let Some(v) = self.ar_at.get(&k) {
                if used.insert(k) {
                    cols.push((format!("AR@{k}"), *v));
                }
            }
        };
        push_ar(&mut cols, 100);
        cols.push(("AP".to_string(), self.ap));
        for t in [0.5, 0.75] {
            if let Some(v) = self.ap_at(t) {
                cols.push((format!("AP@{}", threshold_label(t)), v));
            }
        }
        push_ar(&mut cols, 1);
        push_ar(&mut cols, 10);
        for &k in self.ar_at.keys() {
            push_ar(&mut cols, k);
        }
        cols
    }

    /// Header and value lines with metrics as percentages.
    pub fn table_row(&self) -> (String, String) {
        let cols = self.columns();
        let header = cols
            .iter()
            .map(|(k, _)| format!("{k:>8}"))
            .collect::<String>();
        let values = cols
            .iter()
            .map(|(_, v)| {
                if *v == UNDEFINED_METRIC {
                    format!("{:>8}", "-1")
                } else {
                    format!("{:>8.2}", v * 100.0)
                }
            })
            .collect::<String>();
        (header, values)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization is infallible");
        s.push('\n');
        s
    }
}

struct Columns<'a>(&'a [(String, f64)]);

impl Serialize for Columns<'_> {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mut map = ser.serialize_map(Some(self.0.len()))?;
        for (k, v) in self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Serialize)]
struct ThresholdAp {
    iou: f64,
    ap: f64,
}

#[derive(Serialize)]
struct Counts {
    images: usize,
    gt: usize,
    crowd: usize,
    detections: usize,
}

impl Serialize for EvalReport {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let cols = self.columns();
        let per: Vec<ThresholdAp> = self
            .ap_at
            .iter()
            .map(|&(iou, ap)| ThresholdAp { iou, ap })
            .collect();
        let mut map = ser.serialize_map(Some(5))?;
        map.serialize_entry("metrics", &Columns(&cols))?;
        map.serialize_entry("ap_per_threshold", &per)?;
        map.serialize_entry(
            "counts",
            &Counts {
                images: self.num_images,
                gt: self.num_gt,
                crowd: self.num_crowd,
                detections: self.num_detections,
            },
        )?;
        map.serialize_entry("images", &self.images)?;
        map.serialize_entry("warnings", &self.warnings)?;
        map.end()
    }
}

/// Evaluates `dets` against `gt` over the union of declared, annotated and
/// detected image ids. Detections on images without ground truth count as
/// false positives and are flagged in the warnings.
pub fn evaluate(
    gt: &GtDataset,
    dets: &[Detection],
    cfg: &EvalConfig,
    exec: Execution,
) -> Result<EvalReport> {
    cfg.validate()?;
    if let Some(d) = dets.iter().find(|d| !d.score.is_finite()) {
        return Err(Error::OutOfRange {
            what: "detection score",
            value: d.score,
        });
    }

    let mut gts_by_image: BTreeMap<u64, Vec<GroundTruthBox>> = BTreeMap::new();
    for g in &gt.boxes {
        gts_by_image.entry(g.image_id).or_default().push(*g);
    }
    let mut dets_by_image: BTreeMap<u64, Vec<Detection>> = BTreeMap::new();
    for d in dets {
        dets_by_image.entry(d.image_id).or_default().push(*d);
    }

    let mut warnings = Vec::new();
    let undeclared: Vec<u64> = gts_by_image
        .keys()
        .filter(|id| !gt.images.contains_key(id))
        .copied()
        .collect();
    if !undeclared.is_empty() {
        warnings.push(format!(
            "{} annotated image id(s) missing from the image list: {}",
            undeclared.len(),
            preview(&undeclared)
        ));
    }
    let unknown: Vec<u64> = dets_by_image
        .keys()
        .filter(|id| !gt.images.contains_key(id) && !gts_by_image.contains_key(id))
        .copied()
        .collect();
    if !unknown.is_empty() {
        warnings.push(format!(
            "detections on {} image id(s) absent from ground truth (counted as false positives): {}",
            unknown.len(),
            preview(&unknown)
        ));
    }

    let image_ids: Vec<u64> = gt
        .images
        .keys()
        .chain(gts_by_image.keys())
        .chain(dets_by_image.keys())
        .copied()
        .collect::<BTreeSet<u64>>()
        .into_iter()
        .collect();

    let empty_g: Vec<GroundTruthBox> = Vec::new();
    let empty_d: Vec<Detection> = Vec::new();
    let eval_one = |id: &u64| {
        let g = gts_by_image.get(id).unwrap_or(&empty_g);
        let d = dets_by_image.get(id).unwrap_or(&empty_d);
        evaluate_image(*id, d, g, cfg)
    };
    let images: Vec<ImageEval> = match exec {
        Execution::Sequential => image_ids.iter().map(eval_one).collect::<Result<_>>()?,
        Execution::Parallel => image_ids.par_iter().map(eval_one).collect::<Result<_>>()?,
    };

    let num_gt = total_gt(&images);
    if num_gt == 0 {
        warnings.push("no non-crowd ground truth: all metrics are undefined (-1)".to_string());
    }
    let ar_at = cfg
        .recall_budgets
        .iter()
        .map(|&k| (k, average_recall(&images, k, cfg)))
        .collect();
    let (ap, ap_at) = average_precision(&images, cfg);
    let summaries = images
        .iter()
        .map(|i| ImageSummary {
            image_id: i.image_id,
            num_gt: i.num_gt,
            num_crowd: i.num_crowd,
            num_dets: i.num_dets,
            true_positives: (0..cfg.iou_thresholds.len())
                .map(|t| i.true_positives(t, cfg.ap_max_dets))
                .collect(),
        })
        .collect();

    Ok(EvalReport {
        ar_at,
        ap,
        ap_at,
        num_images: images.len(),
        num_gt,
        num_crowd: images.iter().map(|i| i.num_crowd).sum(),
        num_detections: dets.len(),
        images: summaries,
        warnings,
    })
}

fn preview(ids: &[u64]) -> String {
    const SHOWN: usize = 10;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(u64::to_string)
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(", ...");
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x1: f64, y1: f64, x2: f64, y2: f64) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    fn gt(image_id: u64, gt_id: u64, b: BBox) -> GroundTruthBox {
        GroundTruthBox {
            bbox: b,
            image_id,
            gt_id,
            crowd: false,
        }
    }

    fn det(image_id: u64, b: BBox, score: f64) -> Detection {
        Detection::new(b, score, image_id)
    }

    fn dataset(gts: Vec<GroundTruthBox>) -> GtDataset {
        GtDataset {
            images: gts.iter().map(|g| (g.image_id, (640, 480))).collect(),
            boxes: gts,
        }
    }

    #[test]
    fn default_thresholds_are_exact_decimals() {
        let cfg = EvalConfig::default();
        assert_eq!(cfg.iou_thresholds.len(), 10);
        assert_eq!(cfg.iou_thresholds[2], 0.6);
        assert_eq!(cfg.iou_thresholds[5], 0.75);
        assert_eq!(cfg.iou_thresholds[9], 0.95);
    }

    #[test]
    fn exact_match_is_a_true_positive() {
        let g = gt(1, 7, bx(0.0, 0.0, 10.0, 10.0));
        let m = match_image(&[det(1, g.bbox, 0.9)], &[g], 0.5, 100).unwrap();
        assert_eq!(m[0].outcome, MatchOutcome::TruePositive { gt_id: 7 });
    }

    #[test]
    fn partial_overlap_depends_on_threshold() {
        let g = gt(1, 1, bx(0.0, 0.0, 10.0, 10.0));
        let d = [det(1, bx(0.0, 0.0, 10.0, 6.0), 0.9)];
        assert!(matches!(
            match_image(&d, &[g], 0.5, 100).unwrap()[0].outcome,
            MatchOutcome::TruePositive { .. }
        ));
        assert_eq!(
            match_image(&d, &[g], 0.75, 100).unwrap()[0].outcome,
            MatchOutcome::FalsePositive
        );
    }

    #[test]
    fn duplicate_detection_is_false_positive() {
        let g = gt(1, 1, bx(0.0, 0.0, 10.0, 10.0));
        let d = [det(1, g.bbox, 0.6), det(1, g.bbox, 0.9)];
        let m = match_image(&d, &[g], 0.5, 100).unwrap();
        assert_eq!(m[0].det_index, 1);
        assert!(matches!(m[0].outcome, MatchOutcome::TruePositive { .. }));
        assert_eq!(m[1].outcome, MatchOutcome::FalsePositive);
    }

    #[test]
    fn crowd_absorbs_detections() {
        let crowd = GroundTruthBox {
            crowd: true,
            ..gt(1, 2, bx(0.0, 0.0, 100.0, 100.0))
        };
        let real = gt(1, 1, bx(0.0, 0.0, 10.0, 10.0));
        let d = [
            det(1, bx(0.0, 0.0, 10.0, 10.0), 0.9),
            det(1, bx(40.0, 40.0, 60.0, 60.0), 0.8),
            det(1, bx(0.0, 0.0, 10.0, 10.0), 0.7),
        ];
        let m = match_image(&d, &[crowd, real], 0.5, 100).unwrap();
        assert_eq!(m[0].outcome, MatchOutcome::TruePositive { gt_id: 1 });
        assert_eq!(m[1].outcome, MatchOutcome::Ignored);
        assert_eq!(m[2].outcome, MatchOutcome::Ignored);
    }

    #[test]
    fn duplicate_gt_ids_are_rejected() {
        let g = gt(1, 1, bx(0.0, 0.0, 10.0, 10.0));
        assert!(matches!(
            match_image(&[], &[g, g], 0.5, 100),
            Err(Error::DuplicateGtId { .. })
        ));
    }

    #[test]
    fn iou_point_six_case() {
        let g = dataset(vec![gt(1, 1, bx(0.0, 0.0, 10.0, 10.0))]);
        let d = [det(1, bx(0.0, 0.0, 10.0, 6.0), 0.9)];
        let r = evaluate(&g, &d, &EvalConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(r.ar_at[&1], 0.3);
        assert_eq!(r.ap_at(0.5), Some(1.0));
        assert_eq!(r.ap_at(0.75), Some(0.0));
        assert_eq!(r.ap, 0.3);
    }

    #[test]
    fn perfect_and_empty() {
        let boxes = vec![
            gt(1, 1, bx(0.0, 0.0, 10.0, 10.0)),
            gt(1, 2, bx(20.0, 20.0, 40.0, 50.0)),
            gt(2, 3, bx(5.0, 5.0, 25.0, 25.0)),
        ];
        let g = dataset(boxes.clone());
        let perfect: Vec<Detection> = boxes.iter().map(|b| det(b.image_id, b.bbox, 1.0)).collect();
        let r = evaluate(&g, &perfect, &EvalConfig::default(), Execution::Parallel).unwrap();
        // Image 1 holds two GTs, so one detection per image recovers 2 of 3.
        assert!((r.ar_at[&1] - 2.0 / 3.0).abs() < 1e-12);
        assert!(
            r.columns()
                .iter()
                .filter(|(k, _)| k != "AR@1")
                .all(|(_, v)| *v == 1.0),
            "{:?}",
            r.columns()
        );

        let r = evaluate(&g, &[], &EvalConfig::default(), Execution::Parallel).unwrap();
        assert!(r.columns().iter().all(|(_, v)| *v == 0.0));
    }

    #[test]
    fn non_overlapping_detections_score_zero_ap() {
        let g = dataset(vec![gt(1, 1, bx(0.0, 0.0, 10.0, 10.0))]);
        let d = [
            det(1, bx(50.0, 50.0, 60.0, 60.0), 0.9),
            det(1, bx(70.0, 70.0, 80.0, 80.0), 0.3),
        ];
        let r = evaluate(&g, &d, &EvalConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(r.ap, 0.0);
    }

    #[test]
    fn no_ground_truth_is_undefined() {
        let g = GtDataset::default();
        let d = [det(3, bx(0.0, 0.0, 1.0, 1.0), 0.5)];
        let r = evaluate(&g, &d, &EvalConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(r.ap, UNDEFINED_METRIC);
        assert_eq!(r.ar_at[&100], UNDEFINED_METRIC);
        assert!(r
            .warnings
            .iter()
            .any(|w| w.contains("absent from ground truth")));
        assert!(r.warnings.iter().any(|w| w.contains("undefined")));
    }

    #[test]
    fn detections_on_unknown_images_hurt_precision() {
        let g = dataset(vec![gt(1, 1, bx(0.0, 0.0, 10.0, 10.0))]);
        let d = [
            det(1, bx(0.0, 0.0, 10.0, 10.0), 0.5),
            det(9, bx(0.0, 0.0, 10.0, 10.0), 0.9),
        ];
        let r = evaluate(&g, &d, &EvalConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(r.ar_at[&100], 1.0);
        // PR: FP then TP -> precision 0.5 at recall 1 everywhere.
        assert_eq!(r.ap, 0.5);
        assert_eq!(r.warnings.len(), 1);
    }

    #[test]
    fn budgets_truncate_per_image() {
        let g = dataset(vec![
            gt(1, 1, bx(0.0, 0.0, 10.0, 10.0)),
            gt(1, 2, bx(20.0, 0.0, 30.0, 10.0)),
        ]);
        let d = [
            det(1, bx(0.0, 0.0, 10.0, 10.0), 0.9),
            det(1, bx(20.0, 0.0, 30.0, 10.0), 0.8),
        ];
        let r = evaluate(&g, &d, &EvalConfig::default(), Execution::Sequential).unwrap();
        assert_eq!(r.ar_at[&1], 0.5);
        assert_eq!(r.ar_at[&10], 1.0);
    }

    #[test]
    fn threshold_labels() {
        assert_eq!(threshold_label(0.5), ".5");
        assert_eq!(threshold_label(0.75), ".75");
        assert_eq!(threshold_label(1.0), "1");
    }

    #[test]
    fn report_columns_follow_table_order() {
        let g = dataset(vec![gt(1, 1, bx(0.0, 0.0, 10.0, 10.0))]);
        let r = evaluate(&g, &[], &EvalConfig::default(), Execution::Sequential).unwrap();
        let names: Vec<String> = r.columns().into_iter().map(|(k, _)| k).collect();
        assert_eq!(
            names,
            ["AR@100", "AP", "AP@.5", "AP@.75", "AR@1", "AR@10", "AR@300", "AR@1000"]
        );
        let json: serde_json::Value = serde_json::from_str(&r.to_json_pretty()).unwrap();
        assert_eq!(json["metrics"]["AP@.75"], 0.0);
    }

    #[test]
    fn config_validation() {
        assert!(EvalConfig::default().validate().is_ok());
        let c = EvalConfig {
            iou_thresholds: vec![0.7, 0.5],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        let c = EvalConfig {
            recall_budgets: vec![10, 10],
            ..Default::default()
        };
        assert!(c.validate().is_err());
        assert!(EvalConfig::single_threshold(0.5).validate().is_ok());
    }
}
