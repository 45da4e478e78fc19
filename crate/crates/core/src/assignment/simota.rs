use std::cmp::Ordering;

use rayon::prelude::*;

use super::{AnchorLabel, Assignment, CostMatrix, SamplerConfig};

/// Candidate anchors for one GT: its center region, or the whole box when
/// the region holds no anchor center.
pub(crate) fn candidates(cost: &CostMatrix, gt: usize) -> Vec<usize> {
    let n = cost.num_anchors();
    let region: Vec<usize> = (0..n).filter(|&a| cost.in_region(gt, a)).collect();
    if !region.is_empty() {
        return region;
    }
    (0..n).filter(|&a| cost.in_box(gt, a)).collect()
}

/// `max(1, floor(sum of the top_k largest IoUs))`.
pub fn dynamic_k(ious: impl IntoIterator<Item = f64>, top_k: usize) -> usize {
    let mut v: Vec<f64> = ious.into_iter().collect();
    v.sort_unstable_by(|a, b| b.total_cmp(a));
    let sum: f64 = v.iter().take(top_k).sum();
    (sum.floor() as usize).max(1)
}

pub(crate) fn positives_for_gt(cost: &CostMatrix, gt: usize, cfg: &SamplerConfig) -> Vec<usize> {
    let mut cand = candidates(cost, gt);
    if cand.is_empty() {
        return cand;
    }
    let k = if cfg.dynamic_k {
        dynamic_k(cand.iter().map(|&a| cost.iou(gt, a)), cfg.top_k)
    } else {
        cfg.top_k
    }
    .min(cand.len());
    cand.sort_by(|&a, &b| {
        cost.cost(gt, a)
            .total_cmp(&cost.cost(gt, b))
            .then(a.cmp(&b))
    });
    cand.truncate(k);
    cand
}

/// SimOTA: per GT, pick the `k_g` cheapest candidates with `k_g` from
/// [`dynamic_k`]; an anchor picked by several GTs keeps the cheapest one
/// (ties to the lower GT index). Everything else is negative.
///
/// The result does not depend on thread count: per-GT selections are
/// computed independently and merged in GT order.
pub fn assign_simota(cost: &CostMatrix, cfg: &SamplerConfig) -> Assignment {
    let num_gts = cost.num_gts();
    let selections: Vec<Vec<usize>> = (0..num_gts)
        .into_par_iter()
        .map(|g| positives_for_gt(cost, g, cfg))
        .collect();

    let mut owner: Vec<Option<usize>> = vec![None; cost.num_anchors()];
    for (g, picked) in selections.iter().enumerate() {
        for &a in picked {
            owner[a] = match owner[a] {
                Some(prev)
                    if cost.cost(prev, a).total_cmp(&cost.cost(g, a)) != Ordering::Greater =>
                {
                    Some(prev)
                }
                _ => Some(g),
            };
        }
    }
    let labels = owner
        .into_iter()
        .map(|o| o.map_or(AnchorLabel::Negative, AnchorLabel::Positive))
        .collect();
    Assignment::from_labels(labels, num_gts)
}
