//! Localization output: `{"K": int, "width": int, "height": int,
//! "centers": [[x, y, mass], ...]}`, centers sorted by descending mass.

use std::fs;
use std::path::Path;

use crowdmap_core::localize::{Center, LocalizationResult};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CentersDoc {
    #[serde(rename = "K")]
    pub k: usize,
    pub width: usize,
    pub height: usize,
    pub centers: Vec<[f64; 3]>,
}

impl CentersDoc {
    pub fn new(result: &LocalizationResult, width: usize, height: usize) -> Self {
        CentersDoc {
            k: result.k(),
            width,
            height,
            centers: result.centers.iter().map(|c| [c.x, c.y, c.mass]).collect(),
        }
    }

    pub fn to_result(&self) -> Result<LocalizationResult> {
        if self.k != self.centers.len() {
            return Err(Error::Usage(format!(
                "centers file declares K = {} but lists {} centers",
                self.k,
                self.centers.len()
            )));
        }
        Ok(LocalizationResult::new(
            self.centers
                .iter()
                .map(|&[x, y, mass]| Center { x, y, mass })
                .collect(),
        ))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

pub fn load_centers(path: impl AsRef<Path>) -> Result<CentersDoc> {
    let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    Ok(serde_json::from_str(&text)?)
}

pub fn save_centers(doc: &CentersDoc, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path.as_ref(), doc.to_json()?).map_err(|e| Error::io(path, e))
}
