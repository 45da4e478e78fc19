use rayon::prelude::*;

use super::{CenterRegion, SamplerConfig};
use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::geometry::{iou, BBox};
use crate::matrix::Matrix;

/// Additive cost for anchors outside a GT's center region.
pub const OUT_OF_REGION_PENALTY: f64 = 1e5;
/// Added to IoU inside the log of the regression cost.
pub const IOU_COST_EPS: f64 = 1e-8;
/// Scores are clamped to `[SCORE_EPS, 1 - SCORE_EPS]` before taking logs.
const SCORE_EPS: f64 = 1e-7;

/// GT x anchor transport costs with the pairwise IoUs and region masks
/// that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    cost: Matrix,
    ious: Matrix,
    in_region: Vec<bool>,
    in_box: Vec<bool>,
    /// Cost of labelling each anchor background.
    background: Vec<f64>,
}

impl CostMatrix {
    /// Assembles a cost matrix from precomputed parts. `in_region` is
    /// row-major GT x anchor; it doubles as the fallback mask and the
    /// background cost is zero.
    pub fn from_parts(cost: Matrix, ious: Matrix, in_region: Vec<bool>) -> Result<Self> {
        if ious.rows() != cost.rows() || ious.cols() != cost.cols() {
            return Err(Error::LengthMismatch {
                what: "iou matrix",
                expected: cost.rows() * cost.cols(),
                actual: ious.rows() * ious.cols(),
            });
        }
        if in_region.len() != cost.rows() * cost.cols() {
            return Err(Error::LengthMismatch {
                what: "center-region mask",
                expected: cost.rows() * cost.cols(),
                actual: in_region.len(),
            });
        }
        if cost.as_slice().iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("cost matrix"));
        }
        let background = vec![0.0; cost.cols()];
        Ok(Self {
            cost,
            ious,
            in_box: in_region.clone(),
            in_region,
            background,
        })
    }

    #[inline]
    pub fn num_gts(&self) -> usize {
        self.cost.rows()
    }

    #[inline]
    pub fn num_anchors(&self) -> usize {
        self.cost.cols()
    }

    pub fn costs(&self) -> &Matrix {
        &self.cost
    }

    pub fn ious(&self) -> &Matrix {
        &self.ious
    }

    #[inline]
    pub fn cost(&self, gt: usize, anchor: usize) -> f64 {
        self.cost.get(gt, anchor)
    }

    #[inline]
    pub fn iou(&self, gt: usize, anchor: usize) -> f64 {
        self.ious.get(gt, anchor)
    }

    #[inline]
    pub fn in_region(&self, gt: usize, anchor: usize) -> bool {
        self.in_region[gt * self.num_anchors() + anchor]
    }

    /// Anchor center inside the full GT box (fallback candidate set).
    #[inline]
    pub fn in_box(&self, gt: usize, anchor: usize) -> bool {
        self.in_box[gt * self.num_anchors() + anchor]
    }

    pub fn background(&self) -> &[f64] {
        &self.background
    }
}

fn region_for(gt: &BBox, cfg: &SamplerConfig, stride: u32) -> BBox {
    match cfg.center_region {
        CenterRegion::ShrunkBox => gt.scaled_about_center(cfg.center_ratio),
        CenterRegion::StrideRadius { radius } => {
            let (cx, cy) = gt.center();
            let r = radius * stride as f64;
            BBox::new(cx - r, cy - r, cx + r, cy + r).unwrap_or(*gt)
        }
    }
}

/// Anchors whose center lies in `gt` shrunk about its center by `center_ratio`.
/// Region bounds are inclusive.
pub fn center_region_mask(anchors: &AnchorSet, gt: &BBox, center_ratio: f64) -> Vec<bool> {
    let region = gt.scaled_about_center(center_ratio);
    anchors
        .centers()
        .iter()
        .map(|c| region.contains_point(c.x, c.y))
        .collect()
}

/// Per-GT cost, IoU, in-region and in-box rows.
type CostRow = (Vec<f64>, Vec<f64>, Vec<bool>, Vec<bool>);

/// Builds the SimOTA/OTA cost: `BCE(score, 1) + reg_weight * -ln(IoU + eps)`,
/// plus [`OUT_OF_REGION_PENALTY`] outside the GT's center region.
pub fn build_costs(
    anchors: &AnchorSet,
    gts: &[BBox],
    cls_scores: &[f64],
    pred_boxes: &[BBox],
    cfg: &SamplerConfig,
) -> Result<CostMatrix> {
    let n = anchors.len();
    if cls_scores.len() != n {
        return Err(Error::LengthMismatch {
            what: "classification scores",
            expected: n,
            actual: cls_scores.len(),
        });
    }
    if pred_boxes.len() != n {
        return Err(Error::LengthMismatch {
            what: "predicted boxes",
            expected: n,
            actual: pred_boxes.len(),
        });
    }
    if let Some(&s) = cls_scores
        .iter()
        .find(|s| !(s.is_finite() && (0.0..=1.0).contains(*s)))
    {
        return Err(Error::OutOfRange {
            what: "classification score",
            value: s,
        });
    }
    cfg.validate()?;

    let clamped: Vec<f64> = cls_scores
        .iter()
        .map(|s| s.clamp(SCORE_EPS, 1.0 - SCORE_EPS))
        .collect();
    let cls_cost: Vec<f64> = clamped.iter().map(|p| -p.ln()).collect();
    let background: Vec<f64> = clamped.iter().map(|p| -(1.0 - p).ln()).collect();
    let centers = anchors.centers();

    let rows: Vec<CostRow> = gts
        .par_iter()
        .map(|gt| {
            let mut cost = Vec::with_capacity(n);
            let mut ious = Vec::with_capacity(n);
            let mut in_region = Vec::with_capacity(n);
            let mut in_box = Vec::with_capacity(n);
            for a in 0..n {
                let c = centers[a];
                let region = region_for(gt, cfg, c.stride);
                let inside = region.contains_point(c.x, c.y);
                let overlap = iou(&pred_boxes[a], gt);
                let mut total = cls_cost[a] - cfg.reg_weight * (overlap + IOU_COST_EPS).ln();
                if !inside {
                    total += OUT_OF_REGION_PENALTY;
                }
                cost.push(total);
                ious.push(overlap);
                in_region.push(inside);
                in_box.push(gt.contains_point(c.x, c.y));
            }
            (cost, ious, in_region, in_box)
        })
        .collect();

    let g = gts.len();
    let mut cost = Vec::with_capacity(g * n);
    let mut ious = Vec::with_capacity(g * n);
    let mut in_region = Vec::with_capacity(g * n);
    let mut in_box = Vec::with_capacity(g * n);
    for (c, i, r, b) in rows {
        cost.extend(c);
        ious.extend(i);
        in_region.extend(r);
        in_box.extend(b);
    }
    Ok(CostMatrix {
        cost: Matrix::new(g, n, cost)?,
        ious: Matrix::new(g, n, ious)?,
        in_region,
        in_box,
        background,
    })
}
