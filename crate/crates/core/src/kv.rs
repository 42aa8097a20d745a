//! Plain-text `key = value` documents shared by run configs, model fixtures
//! and checkpoint sidecars.
//!
//! One entry per line, `#` starts a comment, keys are a flat dotted
//! namespace. List values are comma separated. Later duplicates override
//! earlier ones, which is how command-line overrides are layered on top of a
//! file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct KvDoc {
    entries: BTreeMap<String, String>,
}

impl KvDoc {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str, source: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = match raw.find('#') {
                Some(pos) => &raw[..pos],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: idx + 1,
                    message: format!("expected `key = value`, found `{line}`"),
                });
            };
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line: idx + 1,
                    message: format!("invalid key `{key}`"),
                });
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_string()).map_err(|e| Error::io(path, e))
    }

    pub fn set(&mut self, key: impl Into<String>, value: impl Display) {
        self.entries.insert(key.into(), value.to_string());
    }

    pub fn set_list<T: Display>(&mut self, key: impl Into<String>, values: &[T]) {
        let joined = values
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(", ");
        self.entries.insert(key.into(), joined);
    }

    /// Overlays every entry of `other` on top of this document.
    pub fn merge(&mut self, other: &KvDoc) {
        for (k, v) in &other.entries {
            self.entries.insert(k.clone(), v.clone());
        }
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| Error::Config(format!("cannot parse `{key} = {v}`"))),
        }
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>> {
        let Some(v) = self.entries.get(key) else {
            return Ok(None);
        };
        if v.trim().is_empty() {
            return Ok(Some(Vec::new()));
        }
        v.split(',')
            .map(|item| {
                item.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("cannot parse item `{item}` of `{key}`")))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn require_list<T: FromStr>(&self, key: &str) -> Result<Vec<T>> {
        self.get_list(key)?
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }
}

impl Display for KvDoc {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for (k, v) in &self.entries {
            writeln!(f, "{k} = {v}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_lists() {
        let doc = KvDoc::parse(
            "# header\nagent.gamma = 0.99  # trailing\n\nnet.hidden = 64, 64\n",
            "t",
        )
        .unwrap();
        assert_eq!(doc.require::<f64>("agent.gamma").unwrap(), 0.99);
        assert_eq!(
            doc.require_list::<usize>("net.hidden").unwrap(),
            vec![64, 64]
        );
        assert!(doc.get::<f64>("missing").unwrap().is_none());
    }

    #[test]
    fn rejects_lines_without_equals() {
        let err = KvDoc::parse("a = 1\nnonsense\n", "cfg").unwrap_err();
        assert!(err.to_string().contains("cfg:2"), "{err}");
    }

    #[test]
    fn display_round_trips() {
        let mut doc = KvDoc::new();
        doc.set("x", 0.1 + 0.2);
        doc.set_list("y", &[1.5, -2.0]);
        let back = KvDoc::parse(&doc.to_string(), "t").unwrap();
        assert_eq!(back, doc);
        assert_eq!(back.require::<f64>("x").unwrap(), 0.1 + 0.2);
    }
}
