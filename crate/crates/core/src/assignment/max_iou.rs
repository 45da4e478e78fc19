use super::{AnchorLabel, Assignment};
use crate::matrix::Matrix;

/// IoU-threshold assignment over a GT x anchor IoU matrix.
///
/// An anchor is positive for its best GT when that IoU reaches `pos_thr`,
/// negative below `neg_thr`, and ignored in between. Each GT's best anchor
/// (ties to the lowest index) is then forced positive if it overlaps at
/// all; an anchor claimed this way by several GTs goes to the one it
/// overlaps most.
pub fn assign_max_iou(ious: &Matrix, pos_thr: f64, neg_thr: f64) -> Assignment {
    let num_gts = ious.rows();
    let num_anchors = ious.cols();

    let mut labels: Vec<AnchorLabel> = (0..num_anchors)
        .map(|a| {
            let mut best = None::<(usize, f64)>;
            for g in 0..num_gts {
                let v = ious.get(g, a);
                if best.is_none_or(|(_, b)| v > b) {
                    best = Some((g, v));
                }
            }
            match best {
                Some((g, v)) if v >= pos_thr => AnchorLabel::Positive(g),
                Some((_, v)) if v >= neg_thr => AnchorLabel::Ignore,
                _ => AnchorLabel::Negative,
            }
        })
        .collect();

    // anchor -> (gt, iou) of the strongest GT that forces it
    let mut forced: Vec<Option<(usize, f64)>> = vec![None; num_anchors];
    for g in 0..num_gts {
        let row = ious.row(g);
        let mut best_a = None::<(usize, f64)>;
        for (a, &v) in row.iter().enumerate() {
            if best_a.is_none_or(|(_, b)| v > b) {
                best_a = Some((a, v));
            }
        }
        if let Some((a, v)) = best_a {
            if v > 0.0 && forced[a].is_none_or(|(_, prev)| v > prev) {
                forced[a] = Some((g, v));
            }
        }
    }
    for (label, f) in labels.iter_mut().zip(&forced) {
        if let Some((g, _)) = f {
            *label = AnchorLabel::Positive(*g);
        }
    }

    Assignment::from_labels(labels, num_gts)
}
