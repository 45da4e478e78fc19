use super::simota::candidates;
use super::{dynamic_k, sinkhorn, AnchorLabel, Assignment, CostMatrix, SamplerConfig};
use crate::error::Result;
use crate::matrix::Matrix;

/// Optimal-transport assignment.
///
/// Each GT supplies `k_g` units (its dynamic-k estimate) and a background
/// supplier provides the rest; every anchor demands one unit. After solving
/// with Sinkhorn, each anchor takes the supplier that sends it the most
/// mass (ties to the lower row), and is positive when that is a GT.
pub fn assign_ota(cost: &CostMatrix, cfg: &SamplerConfig) -> Result<Assignment> {
    let num_gts = cost.num_gts();
    let num_anchors = cost.num_anchors();
    if num_gts == 0 || num_anchors == 0 {
        return Ok(Assignment::from_labels(
            vec![AnchorLabel::Negative; num_anchors],
            num_gts,
        ));
    }

    let mut supply: Vec<f64> = (0..num_gts)
        .map(|g| {
            let cand = candidates(cost, g);
            dynamic_k(cand.iter().map(|&a| cost.iou(g, a)), cfg.top_k) as f64
        })
        .collect();
    let n = num_anchors as f64;
    let gt_total: f64 = supply.iter().sum();
    let with_background = gt_total < n;
    if with_background {
        supply.push(n - gt_total);
    } else {
        for s in &mut supply {
            *s *= n / gt_total;
        }
    }

    let rows = supply.len();
    let mut data = Vec::with_capacity(rows * num_anchors);
    data.extend_from_slice(cost.costs().as_slice());
    if with_background {
        data.extend_from_slice(cost.background());
    }
    let transport_cost = Matrix::new(rows, num_anchors, data)?;
    let demand = vec![1.0; num_anchors];
    let plan = sinkhorn(
        &transport_cost,
        &supply,
        &demand,
        cfg.ota_eps,
        cfg.ota_max_iter,
    )?
    .plan;

    let labels = (0..num_anchors)
        .map(|a| {
            let mut best = 0;
            for r in 1..rows {
                if plan.get(r, a) > plan.get(best, a) {
                    best = r;
                }
            }
            if best < num_gts {
                AnchorLabel::Positive(best)
            } else {
                AnchorLabel::Negative
            }
        })
        .collect();
    Ok(Assignment::from_labels(labels, num_gts))
}
