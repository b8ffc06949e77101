// SPDX-License-Identifier: Apache-2.0

//! Plain-text `key = value` configuration files.

use std::collections::BTreeMap;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: BTreeMap<String, (usize, String)>,
}

impl KeyValues {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Malformed {
                line,
                msg: "expected `key = value`".into(),
            })?;
            let key = key.trim().to_string();
            if entries
                .insert(key.clone(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Malformed {
                    line,
                    msg: format!("duplicate key {key:?}"),
                });
            }
        }
        Ok(Self { entries })
    }

    /// Parses `key` if present.
    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Malformed {
                line: *line,
                msg: format!("cannot parse value {v:?} for {key:?}"),
            }),
        }
    }

    /// Whitespace-separated list value.
    pub fn get_list<T: FromStr>(&self, key: &str, len: usize) -> Result<Option<Vec<T>>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        let bad = || Error::Malformed {
            line: *line,
            msg: format!("expected {len} numbers for {key:?}"),
        };
        let items: Vec<T> = v
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad()))
            .collect::<Result<_>>()?;
        if items.len() != len {
            return Err(bad());
        }
        Ok(Some(items))
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        let Some((line, v)) = self.entries.get(key) else {
            return Ok(None);
        };
        match v.as_str() {
            "1" | "true" | "yes" | "on" => Ok(Some(true)),
            "0" | "false" | "no" | "off" => Ok(Some(false)),
            _ => Err(Error::Malformed {
                line: *line,
                msg: format!("expected a boolean for {key:?}"),
            }),
        }
    }

    /// Rejects keys outside `known`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for (key, (line, _)) in &self.entries {
            if !known.contains(&key.as_str()) {
                return Err(Error::Malformed {
                    line: *line,
                    msg: format!("unknown key {key:?}"),
                });
            }
        }
        Ok(())
    }
}
