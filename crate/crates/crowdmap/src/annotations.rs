//! JSON head annotations: `{"width": int, "height": int, "points": [[x, y], ...]}`.

use std::fs;
use std::path::Path;

use crowdmap_core::{AnnotationSet, Point};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnnotationDoc {
    width: usize,
    height: usize,
    points: Vec<[f64; 2]>,
}

pub fn from_json(text: &str) -> Result<AnnotationSet> {
    let doc: AnnotationDoc = serde_json::from_str(text)?;
    let points = doc.points.iter().map(|&[x, y]| Point::new(x, y)).collect();
    Ok(AnnotationSet::new(doc.width, doc.height, points)?)
}

pub fn to_json(ann: &AnnotationSet) -> Result<String> {
    let doc = AnnotationDoc {
        width: ann.width(),
        height: ann.height(),
        points: ann.points().iter().map(|p| [p.x, p.y]).collect(),
    };
    Ok(serde_json::to_string(&doc)?)
}

pub fn load_annotations(path: impl AsRef<Path>) -> Result<AnnotationSet> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    from_json(&text)
}

pub fn save_annotations(ann: &AnnotationSet, path: impl AsRef<Path>) -> Result<()> {
    let text = to_json(ann)?;
    fs::write(path.as_ref(), text).map_err(|e| Error::io(path, e))
}
