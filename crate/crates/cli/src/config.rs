//! Flat `key = value` configuration files, with CLI flags overriding file
//! values and a resolved-config echo written alongside results.
//!
//! Lines are `key = value`; `#` starts a comment; blank lines are
//! ignored. Keys may carry a method prefix (`saga-ld.delta = 1e-4`) to
//! scope a value to one method in grid definitions.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::CliError;

/// An ordered key → value map (ordering keeps the echo deterministic).
#[derive(Clone, Debug, Default)]
pub struct ConfigMap {
    entries: BTreeMap<String, String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::config(format!(
                    "line {}: expected `key = value`, got `{raw}`",
                    lineno + 1
                )));
            };
            let key = key.trim().to_ascii_lowercase();
            let value = value.trim().to_string();
            if key.is_empty() {
                return Err(CliError::config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key, value);
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Inserts `value` under `key`, overriding any file value.
    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries
            .insert(key.to_ascii_lowercase(), value.to_string());
    }

    pub fn set_if_some<T: ToString>(&mut self, key: &str, value: &Option<T>) {
        if let Some(v) = value {
            self.set(key, v.to_string());
        }
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    /// Method-scoped lookup: `"<method>.<key>"` wins over plain `<key>`.
    pub fn get_scoped(&self, method: &str, key: &str) -> Option<&str> {
        self.entries
            .get(&format!("{method}.{key}"))
            .or_else(|| self.entries.get(key))
            .map(String::as_str)
    }

    pub fn parse_value<T>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|e| CliError::config(format!("key `{key}`: cannot parse `{raw}`: {e}"))),
        }
    }

    pub fn require<T>(&self, key: &str) -> Result<T, CliError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        self.parse_value(key)?
            .ok_or_else(|| CliError::config(format!("missing required key `{key}`")))
    }

    /// Comma-separated list parser (used for grids and method lists).
    pub fn parse_list<T>(&self, raw: &str, key: &str) -> Result<Vec<T>, CliError>
    where
        T: std::str::FromStr,
        T::Err: std::fmt::Display,
    {
        raw.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<T>()
                    .map_err(|e| CliError::config(format!("key `{key}`: bad entry `{s}`: {e}")))
            })
            .collect()
    }

    /// Serializes the resolved configuration, one `key = value` per line,
    /// sorted by key. Re-parseable by [`ConfigMap::parse`].
    pub fn render(&self) -> String {
        let mut out = String::new();
        for (key, value) in &self.entries {
            let _ = writeln!(out, "{key} = {value}");
        }
        out
    }

    /// Writes the resolved-config echo next to `out_path`
    /// (`<out>.resolved`).
    pub fn write_echo(&self, out_path: &Path) -> Result<std::path::PathBuf, CliError> {
        let mut echo = out_path.as_os_str().to_os_string();
        echo.push(".resolved");
        let echo_path = std::path::PathBuf::from(echo);
        std::fs::write(&echo_path, self.render())?;
        Ok(echo_path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_overrides() {
        let mut map = ConfigMap::parse(
            "# experiment\nmethods = sgld , saga-ld\ndelta = 1e-3,1e-4 # grid\n\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(map.get("methods"), Some("sgld , saga-ld"));
        assert_eq!(map.require::<u64>("seed").unwrap(), 7);
        map.set("seed", 9u64);
        assert_eq!(map.require::<u64>("seed").unwrap(), 9);
    }

    #[test]
    fn scoped_lookup_prefers_method_key() {
        let map = ConfigMap::parse("delta = 1e-3\nsgld.delta = 1e-2\n").unwrap();
        assert_eq!(map.get_scoped("sgld", "delta"), Some("1e-2"));
        assert_eq!(map.get_scoped("saga-ld", "delta"), Some("1e-3"));
    }

    #[test]
    fn malformed_line_names_its_number() {
        let err = ConfigMap::parse("a = 1\nnot a pair\n").unwrap_err();
        assert!(err.to_string().contains("line 2"));
    }

    #[test]
    fn render_round_trips() {
        let map = ConfigMap::parse("b = 2\na = 1\n").unwrap();
        let again = ConfigMap::parse(&map.render()).unwrap();
        assert_eq!(again.get("a"), Some("1"));
        assert_eq!(again.get("b"), Some("2"));
        assert_eq!(map.render(), "a = 1\nb = 2\n");
    }
}
