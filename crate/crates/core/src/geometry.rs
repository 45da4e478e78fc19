//! Axis-aligned boxes and the pairwise quantities built on them.
//!
//! Coordinates are continuous pixel positions in corner form. Area is
//! `(x2 - x1) * (y2 - y1)` with no "+1" pixel convention, matching the
//! evaluator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default clamp on `dw`/`dh` before exponentiation: `ln(1000 / 16)`.
pub const DEFAULT_DELTA_CLAMP: f64 = 4.135_166_556_742_356;

/// Axis-aligned rectangle `(x1, y1, x2, y2)` with `x2 >= x1`, `y2 >= y1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BBox {
    x1: f64,
    y1: f64,
    x2: f64,
    y2: f64,
}

impl BBox {
    pub fn new(x1: f64, y1: f64, x2: f64, y2: f64) -> Result<Self> {
        let invalid = |reason| Error::InvalidBox {
            x1,
            y1,
            x2,
            y2,
            reason,
        };
        if !(x1.is_finite() && y1.is_finite() && x2.is_finite() && y2.is_finite()) {
            return Err(invalid("non-finite coordinate"));
        }
        if x2 < x1 || y2 < y1 {
            return Err(invalid("inverted corners"));
        }
        Ok(Self { x1, y1, x2, y2 })
    }

    /// Builds a box from COCO `[x, y, w, h]`; `x2 = x + w` exactly.
    pub fn from_xywh(x: f64, y: f64, w: f64, h: f64) -> Result<Self> {
        if w < 0.0 || h < 0.0 {
            return Err(Error::InvalidBox {
                x1: x,
                y1: y,
                x2: x + w,
                y2: y + h,
                reason: "negative width or height",
            });
        }
        Self::new(x, y, x + w, y + h)
    }

    pub fn from_center(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        Self::new(cx - 0.5 * w, cy - 0.5 * h, cx + 0.5 * w, cy + 0.5 * h)
    }

    #[inline]
    pub fn x1(&self) -> f64 {
        self.x1
    }
    #[inline]
    pub fn y1(&self) -> f64 {
        self.y1
    }
    #[inline]
    pub fn x2(&self) -> f64 {
        self.x2
    }
    #[inline]
    pub fn y2(&self) -> f64 {
        self.y2
    }

    #[inline]
    pub fn width(&self) -> f64 {
        self.x2 - self.x1
    }

    #[inline]
    pub fn height(&self) -> f64 {
        self.y2 - self.y1
    }

    #[inline]
    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    #[inline]
    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x1 + self.x2), 0.5 * (self.y1 + self.y2))
    }

    #[inline]
    pub fn is_degenerate(&self) -> bool {
        self.area() <= 0.0
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.x1, self.y1, self.x2, self.y2]
    }

    /// `[x, y, w, h]` as used by COCO files.
    pub fn to_xywh(&self) -> [f64; 4] {
        [self.x1, self.y1, self.width(), self.height()]
    }

    /// Area of the overlap with `other` (0 when disjoint or touching).
    #[inline]
    pub fn intersection_area(&self, other: &BBox) -> f64 {
        let w = self.x2.min(other.x2) - self.x1.max(other.x1);
        let h = self.y2.min(other.y2) - self.y1.max(other.y1);
        if w <= 0.0 || h <= 0.0 {
            0.0
        } else {
            w * h
        }
    }

    /// Smallest box containing both.
    pub fn enclosing(&self, other: &BBox) -> BBox {
        BBox {
            x1: self.x1.min(other.x1),
            y1: self.y1.min(other.y1),
            x2: self.x2.max(other.x2),
            y2: self.y2.max(other.y2),
        }
    }

    pub fn contains_point(&self, x: f64, y: f64) -> bool {
        x >= self.x1 && x <= self.x2 && y >= self.y1 && y <= self.y2
    }

    /// Box scaled about its own center by `factor` in both axes.
    pub fn scaled_about_center(&self, factor: f64) -> BBox {
        let (cx, cy) = self.center();
        let hw = 0.5 * self.width() * factor;
        let hh = 0.5 * self.height() * factor;
        BBox {
            x1: cx - hw,
            y1: cy - hh,
            x2: cx + hw,
            y2: cy + hh,
        }
    }
}

impl<'de> Deserialize<'de> for BBox {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let [x1, y1, x2, y2] = <[f64; 4]>::deserialize(de)?;
        BBox::new(x1, y1, x2, y2).map_err(serde::de::Error::custom)
    }
}

/// Image extent in pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ImageSize {
    pub width: u32,
    pub height: u32,
}

impl ImageSize {
    pub fn new(width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidImageSize { width, height });
        }
        Ok(Self { width, height })
    }
}

/// Center-offset / log-size regression target of a box relative to a reference box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxDelta {
    pub dx: f64,
    pub dy: f64,
    pub dw: f64,
    pub dh: f64,
}

impl BoxDelta {
    pub const ZERO: BoxDelta = BoxDelta {
        dx: 0.0,
        dy: 0.0,
        dw: 0.0,
        dh: 0.0,
    };

    pub fn new(dx: f64, dy: f64, dw: f64, dh: f64) -> Self {
        Self { dx, dy, dw, dh }
    }

    fn is_finite(&self) -> bool {
        self.dx.is_finite() && self.dy.is_finite() && self.dw.is_finite() && self.dh.is_finite()
    }
}

/// Intersection over union. Zero-area boxes have IoU 0 with everything,
/// themselves included.
#[inline]
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter <= 0.0 {
        return 0.0;
    }
    inter / (a.area() + b.area() - inter)
}

/// Generalized IoU: `iou - (C - U) / C` with `C` the enclosing-box area.
///
/// Both boxes must have positive area.
pub fn giou(a: &BBox, b: &BBox) -> Result<f64> {
    if a.is_degenerate() || b.is_degenerate() {
        return Err(Error::DegenerateBox("giou requires positive-area boxes"));
    }
    let inter = a.intersection_area(b);
    let union = a.area() + b.area() - inter;
    let enclosing = a.enclosing(b).area();
    // Clamped so rounding can never lift giou above iou.
    Ok(iou(a, b) - ((enclosing - union) / enclosing).max(0.0))
}

/// Regression delta that maps `anchor` onto `target`.
pub fn encode_delta(anchor: &BBox, target: &BBox) -> Result<BoxDelta> {
    if anchor.is_degenerate() {
        return Err(Error::DegenerateBox(
            "anchor must have positive width and height",
        ));
    }
    if target.is_degenerate() {
        return Err(Error::DegenerateBox(
            "target must have positive width and height",
        ));
    }
    let (acx, acy) = anchor.center();
    let (tcx, tcy) = target.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    Ok(BoxDelta {
        dx: (tcx - acx) / aw,
        dy: (tcy - acy) / ah,
        dw: (target.width() / aw).ln(),
        dh: (target.height() / ah).ln(),
    })
}

/// Applies `delta` to `anchor` with the default size clamp.
pub fn decode_delta(anchor: &BBox, delta: &BoxDelta) -> Result<BBox> {
    decode_delta_clamped(anchor, delta, DEFAULT_DELTA_CLAMP)
}

/// Applies `delta` to `anchor`; `dw`/`dh` are clamped to `max_log_scale` first.
pub fn decode_delta_clamped(anchor: &BBox, delta: &BoxDelta, max_log_scale: f64) -> Result<BBox> {
    if anchor.is_degenerate() {
        return Err(Error::DegenerateBox(
            "anchor must have positive width and height",
        ));
    }
    if !delta.is_finite() {
        return Err(Error::NonFinite("box delta"));
    }
    let (acx, acy) = anchor.center();
    let (aw, ah) = (anchor.width(), anchor.height());
    let dw = delta.dw.min(max_log_scale);
    let dh = delta.dh.min(max_log_scale);
    let cx = acx + delta.dx * aw;
    let cy = acy + delta.dy * ah;
    let w = aw * dw.exp();
    let h = ah * dh.exp();
    BBox::from_center(cx, cy, w, h)
}

/// Mirrors a box about the vertical center line of the image.
pub fn hflip(b: &BBox, img: ImageSize) -> BBox {
    let w = img.width as f64;
    BBox {
        x1: w - b.x2,
        y1: b.y1,
        x2: w - b.x1,
        y2: b.y2,
    }
}

/// Clamps a box to `[0, W] x [0, H]`.
pub fn clip(b: &BBox, img: ImageSize) -> BBox {
    let w = img.width as f64;
    let h = img.height as f64;
    BBox {
        x1: b.x1.clamp(0.0, w),
        y1: b.y1.clamp(0.0, h),
        x2: b.x2.clamp(0.0, w),
        y2: b.y2.clamp(0.0, h),
    }
}
