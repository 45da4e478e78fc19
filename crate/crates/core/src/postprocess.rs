//! Proposal post-processing: NMS, top-k budgets, cascade refinement and
//! flip test-time augmentation.

use serde::{Deserialize, Serialize};

use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::geometry::{clip, decode_delta, hflip, iou, BBox, BoxDelta, ImageSize};

pub const DEFAULT_NMS_IOU_THR: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub bbox: BBox,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub iou_score: Option<f64>,
    pub image_id: u64,
}

impl Detection {
    pub fn new(bbox: BBox, score: f64, image_id: u64) -> Self {
        Self {
            bbox,
            score,
            iou_score: None,
            image_id,
        }
    }
}

/// Indices ordered by descending score, ties by ascending index.
pub fn score_order(dets: &[Detection]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score).then(a.cmp(&b)));
    order
}

/// Greedy NMS; returns the kept indices in score order.
pub fn nms_indices(dets: &[Detection], iou_thr: f64) -> Vec<usize> {
    let order = score_order(dets);
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let b = &dets[i].bbox;
        if kept.iter().all(|&k| iou(&dets[k].bbox, b) <= iou_thr) {
            kept.push(i);
        }
    }
    kept
}

/// Greedy hard NMS: walk detections by descending score and keep one iff its
/// IoU with every kept detection is at most `iou_thr`.
pub fn nms(dets: &[Detection], iou_thr: f64) -> Vec<Detection> {
    nms_indices(dets, iou_thr)
        .into_iter()
        .map(|i| dets[i])
        .collect()
}

/// The `k` highest-scoring detections in score order (ties by input order).
pub fn topk_proposals(dets: &[Detection], k: usize) -> Vec<Detection> {
    score_order(dets)
        .into_iter()
        .take(k)
        .map(|i| dets[i])
        .collect()
}

/// Output of one cascade stage for one input box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageOutput {
    pub delta: BoxDelta,
    pub score: f64,
}

/// One stage of a cascade proposal network. `F` is whatever feature
/// representation the caller's model works on.
pub trait StageRefiner<F: ?Sized> {
    fn refine(&self, features: &F, boxes: &[BBox]) -> Vec<StageOutput>;
}

impl<F: ?Sized, T> StageRefiner<F> for T
where
    T: Fn(&F, &[BBox]) -> Vec<StageOutput>,
{
    fn refine(&self, features: &F, boxes: &[BBox]) -> Vec<StageOutput> {
        self(features, boxes)
    }
}

/// Runs the cascade: stage 0 regresses from the anchors, each later stage
/// from the previous stage's boxes. Scores come from the last stage and the
/// final boxes are clipped to the image.
pub fn cascade_refine<F: ?Sized>(
    anchors: &AnchorSet,
    features: &F,
    stages: &[&dyn StageRefiner<F>],
    img: ImageSize,
    image_id: u64,
) -> Result<Vec<Detection>> {
    if stages.is_empty() {
        return Err(Error::config("stages", "cascade needs at least one stage"));
    }
    let mut boxes = anchors.boxes().to_vec();
    let mut scores = Vec::new();
    for stage in stages {
        let out = stage.refine(features, &boxes);
        if out.len() != boxes.len() {
            return Err(Error::LengthMismatch {
                what: "stage refiner output",
                expected: boxes.len(),
                actual: out.len(),
            });
        }
        boxes = boxes
            .iter()
            .zip(&out)
            .map(|(b, o)| decode_delta(b, &o.delta))
            .collect::<Result<_>>()?;
        scores = out.iter().map(|o| o.score).collect();
    }
    Ok(boxes
        .iter()
        .zip(scores)
        .map(|(b, s)| Detection::new(clip(b, img), s, image_id))
        .collect())
}

/// Maps flipped-image detections back, appends them to the originals and
/// suppresses duplicates.
pub fn merge_flip_tta(
    orig: &[Detection],
    flipped: &[Detection],
    img: ImageSize,
    iou_thr: f64,
) -> Vec<Detection> {
    let mut all = Vec::with_capacity(orig.len() + flipped.len());
    all.extend_from_slice(orig);
    all.extend(flipped.iter().map(|d| Detection {
        bbox: hflip(&d.bbox, img),
        ..*d
    }));
    nms(&all, iou_thr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anchors::{generate, PyramidSpec};

    fn det(x1: f64, y1: f64, x2: f64, y2: f64, s: f64) -> Detection {
        Detection::new(BBox::new(x1, y1, x2, y2).unwrap(), s, 1)
    }

    #[test]
    fn nms_threshold_cases() {
        let dets = [
            det(0.0, 0.0, 10.0, 10.0, 0.9),
            det(1.0, 1.0, 11.0, 11.0, 0.8),
        ];
        let v = iou(&dets[0].bbox, &dets[1].bbox);
        assert!((v - 81.0 / 119.0).abs() < 1e-12);
        assert_eq!(nms(&dets, 0.8).len(), 2);
        assert_eq!(nms(&dets, 0.5), vec![dets[0]]);
        assert!(nms(&[], 0.8).is_empty());
    }

    #[test]
    fn nms_ties_prefer_lower_index() {
        let dets = [
            det(0.0, 0.0, 10.0, 10.0, 0.5),
            det(0.0, 0.0, 10.0, 10.0, 0.5),
        ];
        assert_eq!(nms_indices(&dets, 0.5), vec![0]);
    }

    #[test]
    fn topk_cases() {
        let dets = [
            det(0.0, 0.0, 1.0, 1.0, 0.2),
            det(0.0, 0.0, 1.0, 1.0, 0.9),
            det(0.0, 0.0, 1.0, 1.0, 0.5),
        ];
        assert_eq!(topk_proposals(&dets, 1), vec![dets[1]]);
        assert!(topk_proposals(&dets, 0).is_empty());
        assert_eq!(topk_proposals(&dets, 10), vec![dets[1], dets[2], dets[0]]);
    }

    fn zero_stage(_: &(), boxes: &[BBox]) -> Vec<StageOutput> {
        boxes
            .iter()
            .map(|_| StageOutput {
                delta: BoxDelta::ZERO,
                score: 0.5,
            })
            .collect()
    }

    #[test]
    fn zero_delta_cascade_is_clipped_anchors() {
        let img = ImageSize::new(32, 32).unwrap();
        let anchors = generate(&PyramidSpec::new(vec![8, 16], 4.0, img).unwrap());
        let out = cascade_refine(&anchors, &(), &[&zero_stage, &zero_stage], img, 7).unwrap();
        assert_eq!(out.len(), anchors.len());
        for (d, a) in out.iter().zip(anchors.boxes()) {
            assert_eq!(d.bbox, clip(a, img));
            assert_eq!(d.image_id, 7);
        }
    }

    #[test]
    fn single_stage_decodes_and_clips() {
        let img = ImageSize::new(100, 100).unwrap();
        let anchors = AnchorSet::from_boxes(vec![BBox::new(0.0, 0.0, 10.0, 10.0).unwrap()], img);
        let stage = |_: &(), b: &[BBox]| {
            vec![
                StageOutput {
                    delta: BoxDelta::new(0.1, 0.0, 2f64.ln(), 0.0),
                    score: 0.9,
                };
                b.len()
            ]
        };
        let out = cascade_refine(&anchors, &(), &[&stage], img, 0).unwrap();
        let b = out[0].bbox;
        assert!(b.x1() == 0.0 && (b.x2() - 16.0).abs() < 1e-12);
        assert_eq!(out[0].score, 0.9);
    }

    #[test]
    fn stages_compose() {
        let img = ImageSize::new(100, 100).unwrap();
        let anchors = AnchorSet::from_boxes(vec![BBox::new(40.0, 40.0, 50.0, 50.0).unwrap()], img);
        let scale = |_: &(), b: &[BBox]| {
            vec![
                StageOutput {
                    delta: BoxDelta::new(0.0, 0.0, 2f64.ln(), 0.0),
                    score: 1.0,
                };
                b.len()
            ]
        };
        let out = cascade_refine(&anchors, &(), &[&scale, &scale], img, 0).unwrap();
        assert!((out[0].bbox.width() - 40.0).abs() < 1e-9);
        assert_eq!(out[0].bbox.height(), 10.0);
    }

    #[test]
    fn cascade_errors() {
        let img = ImageSize::new(10, 10).unwrap();
        let anchors = AnchorSet::from_boxes(vec![BBox::new(0.0, 0.0, 5.0, 5.0).unwrap()], img);
        assert!(cascade_refine::<()>(&anchors, &(), &[], img, 0).is_err());
        let short = |_: &(), _: &[BBox]| Vec::new();
        assert!(matches!(
            cascade_refine(&anchors, &(), &[&short], img, 0),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn flip_merge_cases() {
        let img = ImageSize::new(100, 50).unwrap();
        let orig = vec![
            det(10.0, 5.0, 30.0, 25.0, 0.9),
            det(60.0, 5.0, 70.0, 15.0, 0.4),
        ];
        assert_eq!(merge_flip_tta(&orig, &[], img, 0.8), nms(&orig, 0.8));

        let mirrored: Vec<Detection> = orig
            .iter()
            .map(|d| Detection {
                bbox: hflip(&d.bbox, img),
                score: d.score - 0.05,
                ..*d
            })
            .collect();
        let merged = merge_flip_tta(&orig, &mirrored, img, 0.8);
        assert_eq!(merged, orig);

        let far = vec![det(80.0, 30.0, 95.0, 45.0, 0.7)];
        let merged = merge_flip_tta(&orig, &far, img, 0.8);
        assert_eq!(merged.len(), 3);
    }
}
