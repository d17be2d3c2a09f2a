//! Plain-text `key = value` config files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys may use either
//! `snake_case` or `kebab-case`; they are normalized to `snake_case`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: u64,
}

pub fn parse(text: &str) -> Result<Vec<Entry>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = (i + 1) as u64;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let (key, value) = trimmed.split_once('=').ok_or_else(|| Error::Malformed {
            line,
            message: format!("expected `key = value`, got {trimmed:?}"),
        })?;
        let key = key.trim().replace('-', "_");
        if key.is_empty() {
            return Err(Error::Malformed {
                line,
                message: "empty key".into(),
            });
        }
        out.push(Entry {
            key,
            value: value.trim().to_string(),
            line,
        });
    }
    Ok(out)
}

pub(crate) fn parse_value<T: std::str::FromStr>(entry: &Entry) -> Result<T> {
    entry.value.parse::<T>().map_err(|_| Error::Malformed {
        line: entry.line,
        message: format!("invalid value {:?} for key {}", entry.value, entry.key),
    })
}
