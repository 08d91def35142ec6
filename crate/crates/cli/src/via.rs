//! VGG Image Annotator (VIA) JSON: version 1 and 2 exports and version 2
//! project files.
//!
//! Each image record carries `filename` and `regions`, either as an array
//! (VIA 2) or as an object keyed by region index (VIA 1). A region is a
//! `shape_attributes` object plus `region_attributes` holding the class label.
//! Project files nest the records under `_via_img_metadata`.

use std::collections::BTreeSet;

use fractoseg_core::mask::FractureClass;
use fractoseg_core::raster::{AnnotationProject, Polygon, Region};
use serde_json::{Map, Value};

/// Attribute keys searched for the label, in order, when a region carries
/// more than one string attribute.
const LABEL_KEYS: [&str; 5] = ["label", "class", "type", "mode", "name"];

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ViaError {
    #[error("malformed JSON at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Structure(String),

    #[error("unknown region labels: {}", .0.join(", "))]
    UnknownLabels(Vec<String>),
}

/// A skipped region and why.
#[derive(Debug, Clone, PartialEq)]
pub struct ViaWarning {
    pub filename: String,
    pub region: usize,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedVia {
    pub project: AnnotationProject,
    pub warnings: Vec<ViaWarning>,
}

pub fn parse_via_json(text: &str) -> Result<ParsedVia, ViaError> {
    let root: Value = serde_json::from_str(text).map_err(|e| ViaError::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let records = match root.get("_via_img_metadata") {
        Some(meta) => meta,
        None => &root,
    };
    let records = records.as_object().ok_or_else(|| {
        ViaError::Structure("top level must be an object of image records".into())
    })?;

    let mut project = AnnotationProject::default();
    let mut warnings = Vec::new();
    let mut unknown = BTreeSet::new();
    for (key, record) in records {
        if key.starts_with("_via_") {
            continue;
        }
        let rec = record
            .as_object()
            .ok_or_else(|| ViaError::Structure(format!("record {key:?} is not an object")))?;
        let filename = rec
            .get("filename")
            .and_then(Value::as_str)
            .ok_or_else(|| ViaError::Structure(format!("record {key:?} has no filename")))?
            .to_string();
        let regions: Vec<&Value> = match rec.get("regions") {
            None | Some(Value::Null) => Vec::new(),
            Some(Value::Array(a)) => a.iter().collect(),
            Some(Value::Object(o)) => o.values().collect(),
            Some(_) => {
                return Err(ViaError::Structure(format!(
                    "{filename}: regions must be a list or object"
                )))
            }
        };
        let entry = project.entries.entry(filename.clone()).or_default();
        for (i, region) in regions.into_iter().enumerate() {
            let warn = |reason: String| ViaWarning {
                filename: filename.clone(),
                region: i,
                reason,
            };
            let shape = region.get("shape_attributes").and_then(Value::as_object);
            let Some(shape) = shape else {
                warnings.push(warn("missing shape_attributes".into()));
                continue;
            };
            let kind = shape.get("name").and_then(Value::as_str).unwrap_or("");
            if kind != "polygon" {
                warnings.push(warn(format!(
                    "{} shape skipped",
                    if kind.is_empty() { "unnamed" } else { kind }
                )));
                continue;
            }
            let label = region
                .get("region_attributes")
                .and_then(Value::as_object)
                .and_then(label_of);
            let class = match label.as_deref().map(FractureClass::from_label) {
                Some(Some(c)) => c,
                Some(None) => {
                    unknown.insert(label.unwrap_or_default());
                    continue;
                }
                None => {
                    unknown.insert("<missing>".to_string());
                    continue;
                }
            };
            let points = match polygon_points(shape) {
                Ok(p) => p,
                Err(reason) => {
                    return Err(ViaError::Structure(format!(
                        "{filename} region {i}: {reason}"
                    )))
                }
            };
            match Polygon::new(points) {
                Ok(polygon) => entry.push(Region { polygon, class }),
                Err(e) => warnings.push(warn(e.to_string())),
            }
        }
    }
    if !unknown.is_empty() {
        return Err(ViaError::UnknownLabels(unknown.into_iter().collect()));
    }
    for w in &warnings {
        log::warn!("{} region {}: {}", w.filename, w.region, w.reason);
    }
    Ok(ParsedVia { project, warnings })
}

fn label_of(attrs: &Map<String, Value>) -> Option<String> {
    let text = |v: &Value| match v {
        Value::String(s) if !s.trim().is_empty() => Some(s.trim().to_string()),
        // Checkbox attributes: {"intergranular": true}.
        Value::Object(o) => {
            let on: Vec<&String> = o
                .iter()
                .filter(|(_, v)| v.as_bool() == Some(true))
                .map(|(k, _)| k)
                .collect();
            (on.len() == 1).then(|| on[0].clone())
        }
        _ => None,
    };
    let candidates: Vec<String> = attrs.values().filter_map(text).collect();
    if candidates.len() == 1 {
        return candidates.into_iter().next();
    }
    LABEL_KEYS.iter().find_map(|k| {
        attrs
            .iter()
            .find(|(name, _)| name.eq_ignore_ascii_case(k))
            .and_then(|(_, v)| text(v))
    })
}

fn polygon_points(shape: &Map<String, Value>) -> Result<Vec<(f64, f64)>, String> {
    let coords = |key: &str| -> Result<Vec<f64>, String> {
        shape
            .get(key)
            .and_then(Value::as_array)
            .ok_or_else(|| format!("{key} missing"))?
            .iter()
            .map(|v| {
                v.as_f64()
                    .ok_or_else(|| format!("{key} holds a non-number"))
            })
            .collect()
    };
    let (xs, ys) = (coords("all_points_x")?, coords("all_points_y")?);
    if xs.len() != ys.len() {
        return Err(format!(
            "{} x coordinates but {} y coordinates",
            xs.len(),
            ys.len()
        ));
    }
    Ok(xs.into_iter().zip(ys).collect())
}
