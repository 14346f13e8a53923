//! Flat `key=value` config files. Flags always win over file values.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::UsageError;

#[derive(Debug, Default)]
pub struct ConfigFile {
    values: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, UsageError> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                UsageError::new(format!("config line {}: expected key=value", i + 1))
            })?;
            let key = key.trim().replace('_', "-");
            if values
                .insert(key.clone(), (i + 1, value.trim().to_string()))
                .is_some()
            {
                return Err(UsageError::new(format!(
                    "config line {}: duplicate key {key}",
                    i + 1
                )));
            }
        }
        Ok(Self { values })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, UsageError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| {
                    UsageError::new(format!("cannot read config {}: {e}", p.display()))
                })?;
                Self::parse(&text)
            }
        }
    }

    /// Remove and parse `key`.
    pub fn take<T>(&mut self, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        match self.values.remove(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|e| UsageError::new(format!("config line {line}: {key}: {e}"))),
        }
    }

    /// `flag`, else the file value; the key is consumed either way.
    pub fn merge<T>(&mut self, flag: Option<T>, key: &str) -> Result<Option<T>, UsageError>
    where
        T: FromStr,
        T::Err: Display,
    {
        let file = self.take(key)?;
        Ok(flag.or(file))
    }

    /// Fails on keys no subcommand option consumed.
    pub fn finish(self) -> Result<(), UsageError> {
        match self.values.into_iter().next() {
            None => Ok(()),
            Some((key, (line, _))) => Err(UsageError::new(format!(
                "config line {line}: unknown key {key}"
            ))),
        }
    }
}
