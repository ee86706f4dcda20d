//! Optional TOML config file. Every key mirrors a command-line flag; flags
//! win over the file, the file wins over built-in defaults.

use std::path::Path;

use anyhow::Context;
use serde::Deserialize;

#[derive(Debug, Clone, Default, PartialEq, Eq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub scs_mode: Option<String>,
    pub case_sensitive: Option<bool>,
    pub max_matchings: Option<u64>,
    pub max_mention_pairings: Option<u64>,
    pub on_guard: Option<String>,
    pub parallel: Option<usize>,
    pub format: Option<String>,
}

impl FileConfig {
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))
    }
}
