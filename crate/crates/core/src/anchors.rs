//! Single-anchor-per-location pyramid grids.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{BBox, ImageSize};

pub const DEFAULT_STRIDES: [u32; 5] = [4, 8, 16, 32, 64];
pub const DEFAULT_BASE_SCALE: f64 = 8.0;

/// Strides and anchor scale for a pyramid over one image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PyramidSpec {
    pub strides: Vec<u32>,
    /// Anchor side = stride * base_scale.
    pub base_scale: f64,
    pub image: ImageSize,
}

impl PyramidSpec {
    pub fn new(strides: Vec<u32>, base_scale: f64, image: ImageSize) -> Result<Self> {
        let spec = Self {
            strides,
            base_scale,
            image,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.strides.contains(&0) {
            return Err(Error::config("strides", "strides must be positive"));
        }
        if self.strides.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config(
                "strides",
                "strides must be strictly increasing",
            ));
        }
        if !(self.base_scale.is_finite() && self.base_scale > 0.0) {
            return Err(Error::config("base_scale", "must be finite and positive"));
        }
        ImageSize::new(self.image.width, self.image.height)?;
        Ok(())
    }
}

/// One pyramid level: a `rows x cols` grid occupying `offset..offset + rows * cols`
/// in the global anchor index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct AnchorLevel {
    pub stride: u32,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
}

impl AnchorLevel {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AnchorCenter {
    pub x: f64,
    pub y: f64,
    pub stride: u32,
}

/// All anchors of a pyramid, flattened level by level in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    levels: Vec<AnchorLevel>,
    boxes: Vec<BBox>,
    centers: Vec<AnchorCenter>,
    image: ImageSize,
}

impl AnchorSet {
    /// Builds an anchor set from explicit boxes (a single pseudo-level with
    /// stride 0). Used for hand-made scenes and per-image prediction boxes.
    pub fn from_boxes(boxes: Vec<BBox>, image: ImageSize) -> Self {
        let centers = boxes
            .iter()
            .map(|b| {
                let (x, y) = b.center();
                AnchorCenter { x, y, stride: 0 }
            })
            .collect();
        let levels = vec![AnchorLevel {
            stride: 0,
            rows: 1,
            cols: boxes.len(),
            offset: 0,
        }];
        Self {
            levels,
            boxes,
            centers,
            image,
        }
    }

    pub fn levels(&self) -> &[AnchorLevel] {
        &self.levels
    }

    pub fn boxes(&self) -> &[BBox] {
        &self.boxes
    }

    pub fn image(&self) -> ImageSize {
        self.image
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }

    pub fn centers(&self) -> &[AnchorCenter] {
        &self.centers
    }
}

/// Lays one square anchor on every cell of every level.
pub fn generate(spec: &PyramidSpec) -> AnchorSet {
    let (w, h) = (spec.image.width, spec.image.height);
    let mut levels = Vec::with_capacity(spec.strides.len());
    let total: usize = spec
        .strides
        .iter()
        .map(|&s| (h.div_ceil(s) as usize) * (w.div_ceil(s) as usize))
        .sum();
    let mut boxes = Vec::with_capacity(total);
    let mut centers = Vec::with_capacity(total);

    for &stride in &spec.strides {
        let rows = h.div_ceil(stride) as usize;
        let cols = w.div_ceil(stride) as usize;
        levels.push(AnchorLevel {
            stride,
            rows,
            cols,
            offset: boxes.len(),
        });
        let s = stride as f64;
        let half = 0.5 * s * spec.base_scale;
        for i in 0..rows {
            let cy = (i as f64 + 0.5) * s;
            for j in 0..cols {
                let cx = (j as f64 + 0.5) * s;
                boxes.push(
                    BBox::new(cx - half, cy - half, cx + half, cy + half)
                        .expect("anchor corners are finite and ordered"),
                );
                centers.push(AnchorCenter {
                    x: cx,
                    y: cy,
                    stride,
                });
            }
        }
    }

    AnchorSet {
        levels,
        boxes,
        centers,
        image: spec.image,
    }
}

/// Anchor centers with their owning stride, in global-index order.
pub fn anchor_centers(set: &AnchorSet) -> Vec<AnchorCenter> {
    set.centers.clone()
}
