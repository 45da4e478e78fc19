use serde::Serialize;

use super::{assign, build_costs, Assignment, CostMatrix, SamplerConfig};
use crate::anchors::AnchorSet;
use crate::error::Result;
use crate::geometry::BBox;

/// Everything needed to build the assignment cost for one image.
#[derive(Debug, Clone, Copy)]
pub struct AssignInputs<'a> {
    pub anchors: &'a AnchorSet,
    pub gts: &'a [BBox],
    pub cls_scores: &'a [f64],
    pub pred_boxes: &'a [BBox],
}

/// Separate assignments for the classification and regression heads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualAssignment {
    pub cls: Assignment,
    pub reg: Assignment,
    pub warnings: Vec<String>,
}

impl DualAssignment {
    /// Number of anchors positive in both heads.
    pub fn overlap(&self) -> usize {
        self.cls
            .labels
            .iter()
            .zip(&self.reg.labels)
            .filter(|(c, r)| c.gt().is_some() && r.gt().is_some())
            .count()
    }

    /// Fraction of classification positives that are also regression
    /// positives; 1.0 when the classification head has none.
    pub fn overlap_fraction(&self) -> f64 {
        let cls = self.cls.num_positives();
        if cls == 0 {
            1.0
        } else {
            self.overlap() as f64 / cls as f64
        }
    }

    pub fn diagnostics(&self) -> AssignDiagnostics {
        let gts = self
            .cls
            .positives_per_gt
            .iter()
            .zip(&self.reg.positives_per_gt)
            .enumerate()
            .map(|(gt, (&cls, &reg))| GtDiagnostics {
                gt,
                cls_positives: cls,
                reg_positives: reg,
            })
            .collect();
        AssignDiagnostics {
            gts,
            cls_positives: self.cls.num_positives(),
            reg_positives: self.reg.num_positives(),
            overlap: self.overlap(),
            overlap_fraction: self.overlap_fraction(),
            unassigned_cls: self.cls.unassigned_gts.clone(),
            unassigned_reg: self.reg.unassigned_gts.clone(),
            warnings: self.warnings.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GtDiagnostics {
    pub gt: usize,
    pub cls_positives: usize,
    pub reg_positives: usize,
}

/// JSON-friendly summary of a [`DualAssignment`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssignDiagnostics {
    pub gts: Vec<GtDiagnostics>,
    pub cls_positives: usize,
    pub reg_positives: usize,
    pub overlap: usize,
    pub overlap_fraction: f64,
    pub unassigned_cls: Vec<usize>,
    pub unassigned_reg: Vec<usize>,
    pub warnings: Vec<String>,
}

fn order_warning(cls_cfg: &SamplerConfig, reg_cfg: &SamplerConfig) -> Vec<String> {
    if cls_cfg.top_k > reg_cfg.top_k {
        vec![format!(
            "classification top_k ({}) exceeds regression top_k ({}); the regression head will get fewer positives",
            cls_cfg.top_k, reg_cfg.top_k
        )]
    } else {
        Vec::new()
    }
}

/// Runs the two samplers over shared inputs. The cost matrix is built once
/// and reused when both configs imply the same cost.
pub fn assign_dual(
    inputs: &AssignInputs<'_>,
    cls_cfg: &SamplerConfig,
    reg_cfg: &SamplerConfig,
) -> Result<DualAssignment> {
    let build = |cfg: &SamplerConfig| {
        build_costs(
            inputs.anchors,
            inputs.gts,
            inputs.cls_scores,
            inputs.pred_boxes,
            cfg,
        )
    };
    let cls_cost = build(cls_cfg)?;
    let reg_cost = if cls_cfg.same_costs(reg_cfg) {
        None
    } else {
        Some(build(reg_cfg)?)
    };
    let cls = assign(&cls_cost, cls_cfg)?;
    let reg = assign(reg_cost.as_ref().unwrap_or(&cls_cost), reg_cfg)?;
    Ok(DualAssignment {
        cls,
        reg,
        warnings: order_warning(cls_cfg, reg_cfg),
    })
}

/// Dual assignment over a prebuilt cost matrix.
pub fn assign_dual_costs(
    cost: &CostMatrix,
    cls_cfg: &SamplerConfig,
    reg_cfg: &SamplerConfig,
) -> Result<DualAssignment> {
    Ok(DualAssignment {
        cls: assign(cost, cls_cfg)?,
        reg: assign(cost, reg_cfg)?,
        warnings: order_warning(cls_cfg, reg_cfg),
    })
}
