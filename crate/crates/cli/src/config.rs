//! Configuration resolution: command-line flags override config-file
//! entries, which override schema defaults. The resolved map is what the
//! commands execute from and what the run manifest records, so a rerun
//! sees exactly the same parameters.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::str::FromStr;

use topicforge_core::{Error, Result};

/// One named parameter of a command.
pub struct ParamSpec {
    /// Config key; the long flag is the same with underscores as dashes.
    pub key: &'static str,
    pub help: &'static str,
    pub default: Option<&'static str>,
    pub required: bool,
    /// Boolean switch: the bare flag means "true".
    pub is_flag: bool,
}

impl ParamSpec {
    pub const fn required(key: &'static str, help: &'static str) -> Self {
        ParamSpec {
            key,
            help,
            default: None,
            required: true,
            is_flag: false,
        }
    }

    pub const fn optional(key: &'static str, help: &'static str) -> Self {
        ParamSpec {
            key,
            help,
            default: None,
            required: false,
            is_flag: false,
        }
    }

    pub const fn with_default(
        key: &'static str,
        help: &'static str,
        default: &'static str,
    ) -> Self {
        ParamSpec {
            key,
            help,
            default: Some(default),
            required: false,
            is_flag: false,
        }
    }

    pub const fn flag(key: &'static str, help: &'static str) -> Self {
        ParamSpec {
            key,
            help,
            default: Some("false"),
            required: false,
            is_flag: true,
        }
    }
}

pub struct CommandSpec {
    pub name: &'static str,
    pub about: &'static str,
    pub params: &'static [ParamSpec],
}

impl CommandSpec {
    pub fn param(&self, key: &str) -> Option<&ParamSpec> {
        self.params.iter().find(|p| p.key == key)
    }
}

/// Fully resolved configuration for one command run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn from_map(values: BTreeMap<String, String>) -> Self {
        Config { values }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.values.insert(key.to_string(), value);
    }

    pub fn require(&self, key: &str) -> Result<&str> {
        self.get(key).ok_or_else(|| {
            Error::config(format!("missing required parameter --{}", flag_name(key)))
        })
    }

    pub fn path(&self, key: &str) -> Result<PathBuf> {
        Ok(PathBuf::from(self.require(key)?))
    }

    pub fn opt_path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<T> {
        let raw = self.require(key)?;
        raw.parse().map_err(|_| {
            Error::config(format!(
                "parameter --{} has invalid value {raw:?}",
                flag_name(key)
            ))
        })
    }

    pub fn parse_opt<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.get(key) {
            None => Ok(None),
            Some(raw) => raw.parse().map(Some).map_err(|_| {
                Error::config(format!(
                    "parameter --{} has invalid value {raw:?}",
                    flag_name(key)
                ))
            }),
        }
    }

    pub fn bool(&self, key: &str) -> Result<bool> {
        match self.get(key).unwrap_or("false") {
            "true" | "1" | "yes" | "on" => Ok(true),
            "false" | "0" | "no" | "off" => Ok(false),
            other => Err(Error::config(format!(
                "parameter --{} expects true or false, got {other:?}",
                flag_name(key)
            ))),
        }
    }
}

pub fn flag_name(key: &str) -> String {
    key.replace('_', "-")
}

/// Parses a `key=value` config file. Blank lines and `#` comments are
/// skipped.
pub fn parse_config_file(path: &str) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)?;
    let mut entries = Vec::new();
    for (number, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::config(format!(
                "{path}:{}: expected key=value, got {line:?}",
                number + 1
            ))
        })?;
        entries.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(entries)
}

/// Layers defaults, then config-file entries, then explicit flag values,
/// and checks required parameters. Unknown config-file keys are
/// rejected so typos cannot silently fall back to defaults.
pub fn resolve(
    spec: &CommandSpec,
    config_file: Option<&str>,
    flag_values: &BTreeMap<String, String>,
) -> Result<Config> {
    let mut values = BTreeMap::new();
    for param in spec.params {
        if let Some(default) = param.default {
            values.insert(param.key.to_string(), default.to_string());
        }
    }
    if let Some(path) = config_file {
        for (key, value) in parse_config_file(path)? {
            if spec.param(&key).is_none() {
                return Err(Error::config(format!(
                    "config file {path}: unknown parameter {key:?} for command {}",
                    spec.name
                )));
            }
            values.insert(key, value);
        }
    }
    for (key, value) in flag_values {
        values.insert(key.clone(), value.clone());
    }
    if spec.param("threads").is_some() && !values.contains_key("threads") {
        if let Ok(env_threads) = std::env::var("TOPICFORGE_THREADS") {
            if !env_threads.trim().is_empty() {
                values.insert("threads".to_string(), env_threads.trim().to_string());
            }
        }
    }
    for param in spec.params {
        if param.required && !values.contains_key(param.key) {
            return Err(Error::config(format!(
                "command {} requires --{}",
                spec.name,
                flag_name(param.key)
            )));
        }
    }
    Ok(Config::from_map(values))
}

#[cfg(test)]
mod tests {
    use super::*;

    const SPEC: CommandSpec = CommandSpec {
        name: "demo",
        about: "",
        params: &[
            ParamSpec::required("input", "input file"),
            ParamSpec::with_default("min_len", "minimum length", "30"),
            ParamSpec::flag("deterministic", "single thread"),
            ParamSpec::optional("threads", "thread count"),
        ],
    };

    #[test]
    fn defaults_then_file_then_flags() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "# comment\nmin_len = 10\ninput=from_file\n").unwrap();

        let mut flags = BTreeMap::new();
        flags.insert("input".to_string(), "from_flag".to_string());
        let cfg = resolve(&SPEC, Some(file.to_str().unwrap()), &flags).unwrap();
        assert_eq!(cfg.get("input"), Some("from_flag"));
        assert_eq!(cfg.get("min_len"), Some("10"));
        assert!(!cfg.bool("deterministic").unwrap());
        assert_eq!(cfg.parse::<usize>("min_len").unwrap(), 10);
    }

    #[test]
    fn unknown_file_keys_and_missing_required_fail() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("bad.conf");
        std::fs::write(&file, "no_such_key=1\n").unwrap();
        assert!(resolve(&SPEC, Some(file.to_str().unwrap()), &BTreeMap::new()).is_err());

        assert!(resolve(&SPEC, None, &BTreeMap::new()).is_err());

        let broken = dir.path().join("broken.conf");
        std::fs::write(&broken, "just a line\n").unwrap();
        let mut flags = BTreeMap::new();
        flags.insert("input".to_string(), "x".to_string());
        assert!(resolve(&SPEC, Some(broken.to_str().unwrap()), &flags).is_err());
    }

    #[test]
    fn typed_getters_report_bad_values() {
        let mut flags = BTreeMap::new();
        flags.insert("input".to_string(), "x".to_string());
        flags.insert("min_len".to_string(), "not_a_number".to_string());
        let cfg = resolve(&SPEC, None, &flags).unwrap();
        assert!(cfg.parse::<usize>("min_len").is_err());
        assert!(cfg.parse_opt::<usize>("threads").unwrap().is_none());
        assert!(cfg.require("absent").is_err());
    }
}
