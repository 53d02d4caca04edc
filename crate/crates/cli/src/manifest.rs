use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

/// Record of one run. Rerunning with `--config manifest.json` reproduces
/// the listed outputs byte for byte.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: RunConfig,
    pub seed: u64,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    /// File names relative to the output directory.
    pub outputs: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

pub const MANIFEST_FILE: &str = "manifest.json";
