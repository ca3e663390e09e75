use std::fs;
use std::path::Path;

use enetype_core::{Checkpoint, Taxonomy};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Run facts stored in a checkpoint's metadata section as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CheckpointMeta {
    pub stage: String,
    pub languages: Vec<String>,
    pub seed: u64,
    pub max_len: usize,
    pub threshold: f64,
    pub content: String,
    pub epochs_run: usize,
}

impl CheckpointMeta {
    pub fn parse(text: &str) -> Option<Self> {
        serde_json::from_str(text).ok()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("metadata serializes")
    }
}

pub fn save_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, ckpt.to_bytes()).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_bytes(&bytes).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// Loads and checks that the checkpoint was trained on `taxonomy`.
pub fn load_checkpoint_for(path: &Path, taxonomy: &Taxonomy) -> Result<Checkpoint> {
    let ckpt = load_checkpoint(path)?;
    ckpt.check_taxonomy(taxonomy.content_hash())
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
    Ok(ckpt)
}

pub fn load_taxonomy(path: &Path) -> Result<Taxonomy> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Taxonomy::load(&text).map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}
