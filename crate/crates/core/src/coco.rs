//! COCO-format ground-truth and result files.
//!
//! Boxes are `[x, y, w, h]` on disk and corner form in memory, with
//! `x2 = x + w`. Category ids are accepted and ignored.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Deserializer, Serialize};

use crate::error::{Error, Result};
use crate::eval::{GroundTruthBox, GtDataset};
use crate::geometry::BBox;
use crate::postprocess::Detection;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoImage {
    pub id: u64,
    pub width: u32,
    pub height: u32,
}

fn crowd_flag<'de, D: Deserializer<'de>>(de: D) -> std::result::Result<bool, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Flag {
        Int(u64),
        Bool(bool),
    }
    match Flag::deserialize(de)? {
        Flag::Int(0) | Flag::Bool(false) => Ok(false),
        Flag::Int(1) | Flag::Bool(true) => Ok(true),
        Flag::Int(v) => Err(serde::de::Error::custom(format!(
            "iscrowd must be 0 or 1, got {v}"
        ))),
    }
}

fn crowd_as_int<S: serde::Serializer>(v: &bool, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_u8(u8::from(*v))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoAnnotation {
    pub id: u64,
    pub image_id: u64,
    pub bbox: [f64; 4],
    #[serde(
        default,
        deserialize_with = "crowd_flag",
        serialize_with = "crowd_as_int"
    )]
    pub iscrowd: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoCategory {
    pub id: u64,
    #[serde(default)]
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoGroundTruth {
    pub images: Vec<CocoImage>,
    pub annotations: Vec<CocoAnnotation>,
    /// Must be present; contents are irrelevant to class-agnostic evaluation.
    pub categories: Vec<serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CocoResult {
    pub image_id: u64,
    pub bbox: [f64; 4],
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category_id: Option<u64>,
}

/// Deserializes JSON text, reporting the failing field path and position.
pub fn parse_json<T: DeserializeOwned>(text: &str, source: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse {
            path: source.to_string(),
            message: if path.is_empty() || path == "." {
                inner.to_string()
            } else {
                format!("at `{path}`: {inner}")
            },
        }
    })
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string(value).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn xywh_box(bbox: [f64; 4], source: &str, field: String) -> Result<BBox> {
    let [x, y, w, h] = bbox;
    BBox::from_xywh(x, y, w, h).map_err(|e| Error::Parse {
        path: source.to_string(),
        message: format!("at `{field}`: {e}"),
    })
}

impl CocoGroundTruth {
    pub fn to_dataset(&self, source: &str) -> Result<GtDataset> {
        let mut images = BTreeMap::new();
        for img in &self.images {
            if img.width == 0 || img.height == 0 {
                return Err(Error::Parse {
                    path: source.to_string(),
                    message: format!("image {} has zero width or height", img.id),
                });
            }
            if images.insert(img.id, (img.width, img.height)).is_some() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    message: format!("duplicate image id {}", img.id),
                });
            }
        }
        let mut seen = std::collections::HashMap::with_capacity(self.annotations.len());
        let mut boxes = Vec::with_capacity(self.annotations.len());
        for (i, a) in self.annotations.iter().enumerate() {
            if seen.insert(a.id, a.image_id).is_some() {
                return Err(Error::DuplicateGtId {
                    image_id: a.image_id,
                    gt_id: a.id,
                });
            }
            boxes.push(GroundTruthBox {
                bbox: xywh_box(a.bbox, source, format!("annotations[{i}].bbox"))?,
                image_id: a.image_id,
                gt_id: a.id,
                crowd: a.iscrowd,
            });
        }
        Ok(GtDataset { images, boxes })
    }
}

pub fn parse_ground_truth(text: &str, source: &str) -> Result<GtDataset> {
    parse_json::<CocoGroundTruth>(text, source)?.to_dataset(source)
}

pub fn load_ground_truth(path: &Path) -> Result<GtDataset> {
    let source = path.display().to_string();
    parse_ground_truth(&read(path)?, &source)
}

pub fn results_to_detections(results: &[CocoResult], source: &str) -> Result<Vec<Detection>> {
    results
        .iter()
        .enumerate()
        .map(|(i, r)| {
            if !r.score.is_finite() {
                return Err(Error::Parse {
                    path: source.to_string(),
                    message: format!("at `[{i}].score`: score must be finite"),
                });
            }
            Ok(Detection::new(
                xywh_box(r.bbox, source, format!("[{i}].bbox"))?,
                r.score,
                r.image_id,
            ))
        })
        .collect()
}

pub fn detections_to_results(dets: &[Detection]) -> Vec<CocoResult> {
    dets.iter()
        .map(|d| CocoResult {
            image_id: d.image_id,
            bbox: d.bbox.to_xywh(),
            score: d.score,
            category_id: None,
        })
        .collect()
}

pub fn parse_detections(text: &str, source: &str) -> Result<Vec<Detection>> {
    results_to_detections(&parse_json::<Vec<CocoResult>>(text, source)?, source)
}

pub fn load_detections(path: &Path) -> Result<Vec<Detection>> {
    let source = path.display().to_string();
    parse_detections(&read(path)?, &source)
}
