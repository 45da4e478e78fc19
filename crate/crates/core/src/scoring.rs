//! Loss values, their closed-form gradients, IoU-branch targets and score fusion.

use serde::{Deserialize, Serialize};

use crate::assignment::Assignment;
use crate::error::{Error, Result};
use crate::geometry::{giou, iou, BBox};

/// Probabilities are clamped to `[PROB_EPS, 1 - PROB_EPS]` before the log.
pub const PROB_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalParams {
    pub alpha: f64,
    pub gamma: f64,
}

impl Default for FocalParams {
    fn default() -> Self {
        Self {
            alpha: 0.25,
            gamma: 2.0,
        }
    }
}

impl FocalParams {
    pub fn new(alpha: f64, gamma: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(Error::OutOfRange {
                what: "focal alpha",
                value: alpha,
            });
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::OutOfRange {
                what: "focal gamma",
                value: gamma,
            });
        }
        Ok(Self { alpha, gamma })
    }

    fn alpha_t(&self, target: bool) -> f64 {
        if target {
            self.alpha
        } else {
            1.0 - self.alpha
        }
    }
}

fn prob_t(p: f64, target: bool) -> Result<f64> {
    if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
        return Err(Error::OutOfRange {
            what: "probability",
            value: p,
        });
    }
    let p = p.clamp(PROB_EPS, 1.0 - PROB_EPS);
    Ok(if target { p } else { 1.0 - p })
}

/// `-alpha_t * (1 - p_t)^gamma * ln(p_t)` for a binary objectness target.
pub fn focal_loss(p: f64, target: bool, params: FocalParams) -> Result<f64> {
    let pt = prob_t(p, target)?;
    Ok(-params.alpha_t(target) * (1.0 - pt).powf(params.gamma) * pt.ln())
}

/// Derivative of [`focal_loss`] with respect to `p` (inside the clamp range).
pub fn focal_loss_grad(p: f64, target: bool, params: FocalParams) -> Result<f64> {
    let pt = prob_t(p, target)?;
    let g = params.gamma;
    let q = 1.0 - pt;
    let d_pt = if g == 0.0 {
        -1.0 / pt
    } else {
        g * q.powf(g - 1.0) * pt.ln() - q.powf(g) / pt
    };
    let sign = if target { 1.0 } else { -1.0 };
    Ok(params.alpha_t(target) * d_pt * sign)
}

/// `1 - giou(pred, target)`, in `[0, 2]`.
pub fn giou_loss(pred: &BBox, target: &BBox) -> Result<f64> {
    Ok(1.0 - giou(pred, target)?)
}

/// Gradient of [`giou_loss`] with respect to `pred`'s `[x1, y1, x2, y2]`.
///
/// Writing the loss as `2 - I/U - U/C`, this differentiates the
/// intersection, union and enclosing areas piecewise. At coordinate ties
/// (where the loss has a kink) the one-sided branch that keeps the
/// target's coordinate is taken.
pub fn giou_loss_grad(pred: &BBox, target: &BBox) -> Result<[f64; 4]> {
    giou(pred, target)?;
    let [px1, py1, px2, py2] = pred.to_array();
    let [tx1, ty1, tx2, ty2] = target.to_array();

    let pw = px2 - px1;
    let ph = py2 - py1;
    let iw = px2.min(tx2) - px1.max(tx1);
    let ih = py2.min(ty2) - py1.max(ty1);
    let overlapping = iw > 0.0 && ih > 0.0;
    let inter = if overlapping { iw * ih } else { 0.0 };
    let union = pred.area() + target.area() - inter;
    let cw = px2.max(tx2) - px1.min(tx1);
    let ch = py2.max(ty2) - py1.min(ty1);
    let enclosing = cw * ch;

    let d_pred_area = [-ph, -pw, ph, pw];
    let d_inter = if overlapping {
        [
            if px1 > tx1 { -ih } else { 0.0 },
            if py1 > ty1 { -iw } else { 0.0 },
            if px2 < tx2 { ih } else { 0.0 },
            if py2 < ty2 { iw } else { 0.0 },
        ]
    } else {
        [0.0; 4]
    };
    let d_enclosing = [
        if px1 < tx1 { -ch } else { 0.0 },
        if py1 < ty1 { -cw } else { 0.0 },
        if px2 > tx2 { ch } else { 0.0 },
        if py2 > ty2 { cw } else { 0.0 },
    ];

    let mut grad = [0.0; 4];
    for k in 0..4 {
        let d_union = d_pred_area[k] - d_inter[k];
        let d_iou = (d_inter[k] * union - inter * d_union) / (union * union);
        let d_ratio = (d_union * enclosing - union * d_enclosing[k]) / (enclosing * enclosing);
        grad[k] = -d_iou - d_ratio;
    }
    Ok(grad)
}

/// IoU-branch training targets: IoU with the assigned GT for positive
/// anchors, 0 elsewhere.
pub fn iou_targets(pred_boxes: &[BBox], assignment: &Assignment, gts: &[BBox]) -> Result<Vec<f64>> {
    if pred_boxes.len() != assignment.labels.len() {
        return Err(Error::LengthMismatch {
            what: "predicted boxes",
            expected: assignment.labels.len(),
            actual: pred_boxes.len(),
        });
    }
    pred_boxes
        .iter()
        .zip(&assignment.labels)
        .map(|(pred, label)| match label.gt() {
            Some(g) => gts.get(g).map(|gt| iou(pred, gt)).ok_or(Error::DanglingGt {
                index: g,
                count: gts.len(),
            }),
            None => Ok(0.0),
        })
        .collect()
}

/// Objectness as the geometric mean of classification and predicted IoU.
#[inline]
pub fn fuse_scores(cls: f64, iou_pred: f64) -> f64 {
    (cls * iou_pred).sqrt()
}
