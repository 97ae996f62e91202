use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{EnsembleModel, LearnError};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const FORMAT_NAME: &str = "vinewatch-ensemble";

#[derive(Serialize)]
struct ContainerRef<'a> {
    format: &'a str,
    version: u32,
    model: &'a EnsembleModel,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct Container {
    model: EnsembleModel,
}

pub fn to_json(model: &EnsembleModel) -> String {
    serde_json::to_string(&ContainerRef { format: FORMAT_NAME, version: MODEL_FORMAT_VERSION, model })
        .expect("model serializes")
}

pub fn from_json(text: &str) -> Result<EnsembleModel, LearnError> {
    let header: Header = serde_json::from_str(text).map_err(|e| LearnError::Persist(e.to_string()))?;
    if header.format != FORMAT_NAME {
        return Err(LearnError::Persist(format!("not a model file (format `{}`)", header.format)));
    }
    if header.version != MODEL_FORMAT_VERSION {
        return Err(LearnError::Version { expected: MODEL_FORMAT_VERSION, found: header.version });
    }
    let c: Container = serde_json::from_str(text).map_err(|e| LearnError::Persist(e.to_string()))?;
    Ok(c.model)
}

pub(crate) fn fingerprint(model: &EnsembleModel) -> String {
    hex::encode(Sha256::digest(to_json(model).as_bytes()))
}

pub fn save_model(path: &Path, model: &EnsembleModel) -> Result<(), LearnError> {
    std::fs::write(path, to_json(model)).map_err(|e| LearnError::Persist(format!("{}: {e}", path.display())))
}

pub fn load_model(path: &Path) -> Result<EnsembleModel, LearnError> {
    let text = std::fs::read_to_string(path).map_err(|e| LearnError::Persist(format!("{}: {e}", path.display())))?;
    from_json(&text)
}
