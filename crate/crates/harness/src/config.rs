//! Flat `key = value` configuration files; `#` starts a comment.

use std::collections::BTreeMap;
use std::path::Path;

use crate::HarnessError;

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, HarnessError> {
    let mut out = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(HarnessError::Config(format!(
                "line {}: expected `key = value`, got `{raw}`",
                lineno + 1
            )));
        };
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() {
            return Err(HarnessError::Config(format!("line {}: empty key", lineno + 1)));
        }
        out.insert(key, value.trim().to_string());
    }
    Ok(out)
}

pub fn read_config(path: &Path) -> Result<BTreeMap<String, String>, HarnessError> {
    parse_config(&std::fs::read_to_string(path)?)
}
