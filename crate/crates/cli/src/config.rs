//! Flat `key = value` configuration files. Command-line flags win over file
//! values; keys the command does not know are rejected.

use std::cell::RefCell;
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::failure::Failure;

#[derive(Debug, Default)]
pub struct Settings {
    path: Option<PathBuf>,
    values: BTreeMap<String, (String, usize)>,
    used: RefCell<BTreeSet<String>>,
}

fn normalize_key(key: &str) -> String {
    key.trim().replace('-', "_")
}

impl Settings {
    pub fn load(path: Option<&Path>) -> Result<Self, Failure> {
        let Some(path) = path else {
            return Ok(Settings::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::io(format!("cannot read config {}: {e}", path.display())))?;
        let mut values = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = match raw.find('#') {
                Some(i) => &raw[..i],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Failure::validation(format!(
                    "{}:{line_no}: expected `key = value`, found `{line}`",
                    path.display()
                )));
            };
            let key = normalize_key(key);
            if key.is_empty() {
                return Err(Failure::validation(format!("{}:{line_no}: empty key", path.display())));
            }
            if let Some((_, first)) = values.insert(key.clone(), (value.trim().to_string(), line_no)) {
                return Err(Failure::validation(format!(
                    "{}:{line_no}: key `{key}` already set on line {first}",
                    path.display()
                )));
            }
        }
        Ok(Settings {
            path: Some(path.to_path_buf()),
            values,
            used: RefCell::default(),
        })
    }

    fn raw(&self, key: &str) -> Option<&(String, usize)> {
        self.used.borrow_mut().insert(key.to_string());
        self.values.get(key)
    }

    /// Flag value if present, else the parsed file value.
    pub fn get<T>(&self, flag: Option<T>, key: &str) -> Result<Option<T>, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let file_value = self.raw(key);
        if flag.is_some() {
            return Ok(flag);
        }
        match file_value {
            None => Ok(None),
            Some((text, line)) => text.parse::<T>().map(Some).map_err(|e| {
                Failure::validation(format!(
                    "config key `{key}` ({}:{line}): {e}",
                    self.path.as_deref().unwrap_or(Path::new("?")).display()
                ))
            }),
        }
    }

    pub fn get_or<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.get(flag, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T>(&self, flag: Option<String>, key: &str) -> Result<Option<Vec<T>>, Failure>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        let Some(text) = self.get::<String>(flag, key)? else {
            return Ok(None);
        };
        text.split(',')
            .map(|t| t.trim())
            .filter(|t| !t.is_empty())
            .map(|t| {
                t.parse::<T>()
                    .map_err(|e| Failure::validation(format!("key `{key}`: bad list item `{t}`: {e}")))
            })
            .collect::<Result<Vec<T>, Failure>>()
            .map(Some)
    }

    pub fn flag(&self, flag: bool, key: &str) -> Result<bool, Failure> {
        Ok(flag || self.get::<bool>(None, key)?.unwrap_or(false))
    }

    /// Errors on file keys no accessor asked for.
    pub fn reject_unknown(&self) -> Result<(), Failure> {
        let used = self.used.borrow();
        let unknown: Vec<&String> = self.values.keys().filter(|k| !used.contains(*k)).collect();
        if unknown.is_empty() {
            Ok(())
        } else {
            Err(Failure::validation(format!(
                "unknown config key(s) in {}: {}",
                self.path.as_deref().unwrap_or(Path::new("?")).display(),
                unknown.iter().map(|k| k.as_str()).collect::<Vec<_>>().join(", ")
            )))
        }
    }
}
