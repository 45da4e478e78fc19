//! Seeded synthetic scenes: COCO ground truth plus noisy detections.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coco::{CocoAnnotation, CocoGroundTruth, CocoImage, CocoResult};
use crate::geometry::{iou, BBox};

const IMAGE_SIZES: [(u32, u32); 4] = [(640, 480), (800, 600), (1024, 768), (512, 512)];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthOptions {
    pub seed: u64,
    pub n_images: usize,
    /// Per-coordinate perturbation as a fraction of box size; 0 gives exact
    /// detections.
    pub jitter: f64,
    pub min_boxes: usize,
    pub max_boxes: usize,
}

impl Default for SynthOptions {
    fn default() -> Self {
        Self {
            seed: 0,
            n_images: 100,
            jitter: 0.1,
            min_boxes: 5,
            max_boxes: 15,
        }
    }
}

fn round2(v: f64) -> f64 {
    (v * 100.0).round() / 100.0
}

/// Generates a deterministic dataset from `opts.seed`.
///
/// Each detection starts from a GT box with every corner moved by up to
/// `jitter` times the box size; its score is its IoU with the source GT
/// times a factor in [0.7, 1). With positive jitter, roughly `jitter * n`
/// low-scored background boxes are added per image.
pub fn generate(opts: &SynthOptions) -> (CocoGroundTruth, Vec<CocoResult>) {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut images = Vec::with_capacity(opts.n_images);
    let mut annotations = Vec::new();
    let mut results = Vec::new();
    let mut next_ann = 1u64;

    for i in 0..opts.n_images {
        let image_id = i as u64 + 1;
        let (w, h) = IMAGE_SIZES[rng.gen_range(0..IMAGE_SIZES.len())];
        images.push(CocoImage {
            id: image_id,
            width: w,
            height: h,
        });
        let (wf, hf) = (w as f64, h as f64);
        let n = rng.gen_range(opts.min_boxes..=opts.max_boxes.max(opts.min_boxes));
        for _ in 0..n {
            let bw = round2(rng.gen_range(16.0..wf / 3.0));
            let bh = round2(rng.gen_range(16.0..hf / 3.0));
            let x = round2(rng.gen_range(0.0..wf - bw));
            let y = round2(rng.gen_range(0.0..hf - bh));
            let gt_xywh = [x, y, bw, bh];
            annotations.push(CocoAnnotation {
                id: next_ann,
                image_id,
                bbox: gt_xywh,
                iscrowd: false,
                category_id: Some(1),
                area: Some(round2(bw * bh)),
            });
            next_ann += 1;

            let factor: f64 = rng.gen_range(0.7..1.0);
            if opts.jitter == 0.0 {
                results.push(CocoResult {
                    image_id,
                    bbox: gt_xywh,
                    score: factor,
                    category_id: Some(1),
                });
                continue;
            }
            let gt = BBox::from_xywh(x, y, bw, bh).expect("generated box is valid");
            let mut shift = |size: f64| opts.jitter * size * rng.gen_range(-1.0..1.0);
            let mut xs = [x + shift(bw), x + bw + shift(bw)];
            let mut ys = [y + shift(bh), y + bh + shift(bh)];
            xs.sort_by(f64::total_cmp);
            ys.sort_by(f64::total_cmp);
            let x1 = round2(xs[0].clamp(0.0, wf));
            let x2 = round2(xs[1].clamp(0.0, wf));
            let y1 = round2(ys[0].clamp(0.0, hf));
            let y2 = round2(ys[1].clamp(0.0, hf));
            if x2 - x1 < 1.0 || y2 - y1 < 1.0 {
                continue;
            }
            let det = BBox::new(x1, y1, x2, y2).expect("clamped box is valid");
            results.push(CocoResult {
                image_id,
                bbox: [x1, y1, round2(x2 - x1), round2(y2 - y1)],
                score: iou(&det, &gt) * factor,
                category_id: Some(1),
            });
        }

        if opts.jitter > 0.0 {
            let n_bg = (opts.jitter * n as f64).round() as usize;
            for _ in 0..n_bg {
                let bw = round2(rng.gen_range(8.0..wf / 4.0));
                let bh = round2(rng.gen_range(8.0..hf / 4.0));
                let x = round2(rng.gen_range(0.0..wf - bw));
                let y = round2(rng.gen_range(0.0..hf - bh));
                results.push(CocoResult {
                    image_id,
                    bbox: [x, y, bw, bh],
                    score: rng.gen_range(0.0..0.3),
                    category_id: Some(1),
                });
            }
        }
    }

    let gt = CocoGroundTruth {
        images,
        annotations,
        categories: vec![serde_json::json!({"id": 1, "name": "object"})],
    };
    (gt, results)
}
