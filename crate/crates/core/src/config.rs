//! Structured config documents (TOML by default, JSON by extension).

use std::path::Path;

use serde::de::DeserializeOwned;

use crate::error::{Error, Result};

pub fn from_toml<T: DeserializeOwned>(text: &str) -> std::result::Result<T, String> {
    toml::from_str(text).map_err(|e| e.to_string())
}

pub fn load_document<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let parsed = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| e.to_string())
    } else {
        from_toml(&text)
    };
    parsed.map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
