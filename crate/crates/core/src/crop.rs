//! Second-stage crop geometry: margin expansion and image <-> patch mapping.
//!
//! Patches are resized to a fixed size regardless of aspect ratio, so the
//! two axes scale independently.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{clip, BBox, ImageSize};

pub const DEFAULT_MARGIN: f64 = 20.0;
pub const DEFAULT_PATCH_SIZE: u32 = 512;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CropSpec {
    pub margin: f64,
    pub patch_w: u32,
    pub patch_h: u32,
}

impl Default for CropSpec {
    fn default() -> Self {
        Self {
            margin: DEFAULT_MARGIN,
            patch_w: DEFAULT_PATCH_SIZE,
            patch_h: DEFAULT_PATCH_SIZE,
        }
    }
}

impl CropSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.margin.is_finite() && self.margin >= 0.0) {
            return Err(Error::config(
                "crop.margin",
                "must be finite and non-negative",
            ));
        }
        if self.patch_w == 0 || self.patch_h == 0 {
            return Err(Error::config(
                "crop.patch_w",
                "patch dimensions must be at least 1",
            ));
        }
        Ok(())
    }
}

/// Crop window in image coordinates plus the per-axis scale into the patch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CropTransform {
    pub crop: BBox,
    pub sx: f64,
    pub sy: f64,
}

/// Grows `bbox` by the margin on every side, clips it to the image and
/// computes the patch scales.
pub fn expand(bbox: &BBox, spec: &CropSpec, img: ImageSize) -> Result<CropTransform> {
    spec.validate()?;
    let m = spec.margin;
    let grown = BBox::new(bbox.x1() - m, bbox.y1() - m, bbox.x2() + m, bbox.y2() + m)?;
    let crop = clip(&grown, img);
    if crop.is_degenerate() {
        return Err(Error::DegenerateBox(
            "crop is empty after clipping to the image",
        ));
    }
    Ok(CropTransform {
        crop,
        sx: spec.patch_w as f64 / crop.width(),
        sy: spec.patch_h as f64 / crop.height(),
    })
}

/// Image coordinates to patch coordinates.
pub fn to_patch(pt: (f64, f64), t: &CropTransform) -> (f64, f64) {
    ((pt.0 - t.crop.x1()) * t.sx, (pt.1 - t.crop.y1()) * t.sy)
}

/// Patch coordinates to image coordinates; inverse of [`to_patch`].
pub fn to_image(pt: (f64, f64), t: &CropTransform) -> (f64, f64) {
    (pt.0 / t.sx + t.crop.x1(), pt.1 / t.sy + t.crop.y1())
}
