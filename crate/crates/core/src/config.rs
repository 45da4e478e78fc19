//! Pipeline configuration. Every default is one of the reported settings:
//! NMS IoU 0.8, both samplers at center ratio 0.25 with top-k 10 / 20,
//! crop margin 20 px into 512 x 512 patches, COCO evaluation.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::anchors::{PyramidSpec, DEFAULT_BASE_SCALE, DEFAULT_STRIDES};
use crate::assignment::SamplerConfig;
use crate::coco::parse_json;
use crate::crop::CropSpec;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::geometry::ImageSize;
use crate::postprocess::DEFAULT_NMS_IOU_THR;

/// Pyramid layout without the image size, which varies per image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PyramidConfig {
    pub strides: Vec<u32>,
    pub base_scale: f64,
}

impl Default for PyramidConfig {
    fn default() -> Self {
        Self {
            strides: DEFAULT_STRIDES.to_vec(),
            base_scale: DEFAULT_BASE_SCALE,
        }
    }
}

impl PyramidConfig {
    pub fn for_image(&self, image: ImageSize) -> Result<PyramidSpec> {
        PyramidSpec::new(self.strides.clone(), self.base_scale, image).map_err(|e| match e {
            Error::InvalidConfig { field, reason } => Error::InvalidConfig {
                field: format!("pyramid.{field}"),
                reason,
            },
            other => other,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub nms_iou_thr: f64,
    pub cls_sampler: SamplerConfig,
    pub reg_sampler: SamplerConfig,
    pub crop: CropSpec,
    pub eval: EvalConfig,
    pub pyramid: PyramidConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            nms_iou_thr: DEFAULT_NMS_IOU_THR,
            cls_sampler: SamplerConfig::classification(),
            reg_sampler: SamplerConfig::regression(),
            crop: CropSpec::default(),
            eval: EvalConfig::default(),
            pyramid: PyramidConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.nms_iou_thr >= 0.0 && self.nms_iou_thr <= 1.0) {
            return Err(Error::config("nms_iou_thr", "must lie in [0, 1]"));
        }
        self.cls_sampler.validate_at("cls_sampler.")?;
        self.reg_sampler.validate_at("reg_sampler.")?;
        self.crop.validate()?;
        self.eval.validate_at("eval.")?;
        // Any valid image size works for checking the pyramid fields.
        self.pyramid.for_image(ImageSize {
            width: 1,
            height: 1,
        })?;
        Ok(())
    }

    pub fn from_json(text: &str, source: &str) -> Result<Self> {
        let cfg: Self = parse_json(text, source)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text, &path.display().to_string())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialization is infallible")
    }
}
