//! Label assignment: which anchors train against which ground-truth box.
//!
//! Three assigners share one cost/IoU representation:
//!
//! * [`assign_max_iou`]: the IoU-threshold RPN baseline.
//! * [`assign_ota`]: optimal-transport assignment solved with [`sinkhorn`].
//! * [`assign_simota`]: per-GT dynamic-k selection under a center prior.
//!
//! [`assign_dual`] runs two SimOTA samplers with different `top_k` over
//! the same inputs, producing separate classification and regression
//! assignments.

mod cost;
mod dual;
mod max_iou;
mod ota;
mod simota;
mod sinkhorn;

pub use cost::{build_costs, center_region_mask, CostMatrix, IOU_COST_EPS, OUT_OF_REGION_PENALTY};
pub use dual::{
    assign_dual, assign_dual_costs, AssignDiagnostics, AssignInputs, DualAssignment, GtDiagnostics,
};
pub use max_iou::assign_max_iou;
pub use ota::assign_ota;
pub use simota::{assign_simota, dynamic_k};
pub use sinkhorn::{sinkhorn, sinkhorn_with_tolerance, TransportPlan, DEFAULT_SINKHORN_TOL};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_CENTER_RATIO: f64 = 0.25;
pub const DEFAULT_CLS_TOP_K: usize = 10;
pub const DEFAULT_REG_TOP_K: usize = 20;
pub const DEFAULT_REG_WEIGHT: f64 = 3.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AssignMode {
    MaxIou,
    Ota,
    Simota,
}

/// Shape of the admissible region around each GT center.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CenterRegion {
    /// GT box shrunk about its center by `center_ratio` in both axes.
    ShrunkBox,
    /// Square of half-side `radius * stride` about the GT center.
    StrideRadius { radius: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerConfig {
    pub mode: AssignMode,
    pub center_ratio: f64,
    pub center_region: CenterRegion,
    /// Candidate pool size for dynamic-k (or the fixed k when `dynamic_k` is off).
    pub top_k: usize,
    pub dynamic_k: bool,
    /// Weight of the IoU cost relative to the classification cost.
    pub reg_weight: f64,
    /// Thresholds for `max_iou` mode.
    pub pos_iou_thr: f64,
    pub neg_iou_thr: f64,
    /// Entropic regularization and iteration cap for `ota` mode.
    pub ota_eps: f64,
    pub ota_max_iter: usize,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: AssignMode::Simota,
            center_ratio: DEFAULT_CENTER_RATIO,
            center_region: CenterRegion::ShrunkBox,
            top_k: DEFAULT_CLS_TOP_K,
            dynamic_k: true,
            reg_weight: DEFAULT_REG_WEIGHT,
            pos_iou_thr: 0.7,
            neg_iou_thr: 0.3,
            ota_eps: 0.1,
            ota_max_iter: 1000,
        }
    }
}

impl SamplerConfig {
    /// Classification-head sampler: center ratio 0.25, top-k 10.
    pub fn classification() -> Self {
        Self::default()
    }

    /// Regression-head sampler: center ratio 0.25, top-k 20.
    pub fn regression() -> Self {
        Self {
            top_k: DEFAULT_REG_TOP_K,
            ..Self::default()
        }
    }

    pub fn with_top_k(mut self, top_k: usize) -> Self {
        self.top_k = top_k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("")
    }

    /// Validates, prefixing field names with `prefix` in error messages.
    pub fn validate_at(&self, prefix: &str) -> Result<()> {
        let field = |name: &str| format!("{prefix}{name}");
        if !(self.center_ratio > 0.0 && self.center_ratio <= 1.0) {
            return Err(Error::config(field("center_ratio"), "must lie in (0, 1]"));
        }
        if self.top_k < 1 {
            return Err(Error::config(field("top_k"), "must be at least 1"));
        }
        if !(self.reg_weight.is_finite() && self.reg_weight > 0.0) {
            return Err(Error::config(
                field("reg_weight"),
                "must be finite and positive",
            ));
        }
        if let CenterRegion::StrideRadius { radius } = self.center_region {
            if !(radius.is_finite() && radius > 0.0) {
                return Err(Error::config(
                    field("center_region.radius"),
                    "must be finite and positive",
                ));
            }
        }
        if !(0.0..=1.0).contains(&self.neg_iou_thr)
            || !(0.0..=1.0).contains(&self.pos_iou_thr)
            || self.neg_iou_thr > self.pos_iou_thr
        {
            return Err(Error::config(
                field("pos_iou_thr"),
                "thresholds must satisfy 0 <= neg_iou_thr <= pos_iou_thr <= 1",
            ));
        }
        if !(self.ota_eps.is_finite() && self.ota_eps > 0.0) {
            return Err(Error::config(
                field("ota_eps"),
                "must be finite and positive",
            ));
        }
        if self.ota_max_iter < 1 {
            return Err(Error::config(field("ota_max_iter"), "must be at least 1"));
        }
        Ok(())
    }

    /// True when both configs produce the same cost matrix.
    pub(crate) fn same_costs(&self, other: &SamplerConfig) -> bool {
        self.center_ratio == other.center_ratio
            && self.center_region == other.center_region
            && self.reg_weight == other.reg_weight
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnchorLabel {
    Positive(usize),
    Negative,
    /// Neither positive nor negative (only produced by the max-IoU assigner).
    Ignore,
}

impl AnchorLabel {
    pub fn gt(&self) -> Option<usize> {
        match self {
            AnchorLabel::Positive(g) => Some(*g),
            _ => None,
        }
    }
}

/// Per-anchor labels plus per-GT summary counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Assignment {
    pub labels: Vec<AnchorLabel>,
    pub positives_per_gt: Vec<usize>,
    /// GTs that ended with no positive anchor.
    pub unassigned_gts: Vec<usize>,
}

impl Assignment {
    pub(crate) fn from_labels(labels: Vec<AnchorLabel>, num_gts: usize) -> Self {
        let mut positives_per_gt = vec![0; num_gts];
        for g in labels.iter().filter_map(AnchorLabel::gt) {
            positives_per_gt[g] += 1;
        }
        let unassigned_gts = positives_per_gt
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(g, _)| g)
            .collect();
        Self {
            labels,
            positives_per_gt,
            unassigned_gts,
        }
    }

    pub fn num_positives(&self) -> usize {
        self.positives_per_gt.iter().sum()
    }

    pub fn positive_anchors(&self) -> Vec<usize> {
        self.labels
            .iter()
            .enumerate()
            .filter(|(_, l)| l.gt().is_some())
            .map(|(a, _)| a)
            .collect()
    }

    pub fn is_positive(&self, anchor: usize) -> bool {
        self.labels[anchor].gt().is_some()
    }
}

/// Runs the assigner selected by `cfg.mode`.
pub fn assign(cost: &CostMatrix, cfg: &SamplerConfig) -> Result<Assignment> {
    cfg.validate()?;
    match cfg.mode {
        AssignMode::MaxIou => Ok(assign_max_iou(
            cost.ious(),
            cfg.pos_iou_thr,
            cfg.neg_iou_thr,
        )),
        AssignMode::Ota => assign_ota(cost, cfg),
        AssignMode::Simota => Ok(assign_simota(cost, cfg)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_samplers_carry_the_reported_hyperparameters() {
        let cls = SamplerConfig::classification();
        let reg = SamplerConfig::regression();
        assert_eq!(cls.center_ratio, 0.25);
        assert_eq!(reg.center_ratio, 0.25);
        assert_eq!(cls.top_k, 10);
        assert_eq!(reg.top_k, 20);
        assert_eq!(cls.reg_weight, 3.0);
    }

    #[test]
    fn config_validation() {
        assert!(SamplerConfig::default().validate().is_ok());
        let bad = SamplerConfig {
            top_k: 0,
            ..Default::default()
        };
        let err = bad.validate_at("cls_sampler.").unwrap_err().to_string();
        assert!(err.contains("cls_sampler.top_k"), "{err}");
        let bad = SamplerConfig {
            center_ratio: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            center_ratio: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = serde_json::from_str::<SamplerConfig>(r#"{"top_k": 3, "bogus": 1}"#);
        assert!(err.is_err());
        let cfg: SamplerConfig = serde_json::from_str(r#"{"top_k": 3}"#).unwrap();
        assert_eq!(cfg.top_k, 3);
        assert_eq!(cfg.center_ratio, 0.25);
    }

    #[test]
    fn from_labels_counts() {
        let a = Assignment::from_labels(
            vec![
                AnchorLabel::Positive(1),
                AnchorLabel::Negative,
                AnchorLabel::Positive(1),
                AnchorLabel::Ignore,
            ],
            3,
        );
        assert_eq!(a.positives_per_gt, vec![0, 2, 0]);
        assert_eq!(a.unassigned_gts, vec![0, 2]);
        assert_eq!(a.positive_anchors(), vec![0, 2]);
        assert_eq!(a.num_positives(), 2);
    }
}
