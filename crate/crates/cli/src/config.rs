//! Flat `key = value` run configuration.
//!
//! A config file holds one `key = value` pair per line (`#` starts a comment).
//! Flags override file values. Each subcommand accepts a fixed set of keys;
//! anything else is rejected before a run starts.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Couple,
    Meanfield,
    OracleCheck,
    Sweep,
    Block,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Couple => "couple",
            Command::Meanfield => "meanfield",
            Command::OracleCheck => "oracle-check",
            Command::Sweep => "sweep",
            Command::Block => "block",
        }
    }

    /// Accepted keys and their defaults. `None` means the key is required.
    fn keys(self) -> &'static [(&'static str, Option<&'static str>)] {
        match self {
            Command::Simulate => &[
                ("seed", None),
                ("format", Some("csv")),
                ("lambda", Some("2")),
                ("alpha", Some("1")),
                ("d", Some("1")),
                ("side", Some("64")),
                ("boundary", Some("periodic")),
                ("engine", Some("gillespie")),
                ("t_max", Some("10")),
                ("init", Some("single")),
                ("spreader_density", Some("0.1")),
                ("stifler_density", Some("0")),
                ("snapshot", Some("")),
                ("sample_interval", Some("0")),
                ("event_log", Some("false")),
                ("stop_on_extinction", Some("true")),
            ],
            Command::Couple => &[
                ("seed", None),
                ("format", Some("csv")),
                ("lambda", Some("2")),
                ("alpha", Some("0.5")),
                ("d", Some("1")),
                ("side", Some("64")),
                ("boundary", Some("periodic")),
                ("t_max", Some("50")),
                ("replicas", Some("1")),
                ("init", Some("single")),
                ("spreader_density", Some("0.1")),
                ("stifler_density", Some("0")),
                ("snapshot", Some("")),
            ],
            Command::Meanfield => &[
                ("seed", None),
                ("format", Some("csv")),
                ("lambda", Some("2")),
                ("alpha", Some("1")),
                ("u1", Some("0.01")),
                ("u2", Some("0")),
                ("t_max", Some("50")),
                ("dt", Some("0.001")),
            ],
            Command::OracleCheck => &[
                ("seed", None),
                ("format", Some("json")),
                ("lambda", Some("2")),
                ("alpha", Some("1")),
                ("d", Some("1")),
                ("side", Some("4")),
                ("boundary", Some("periodic")),
                ("engine", Some("both")),
                ("t", Some("1")),
                ("replicas", Some("100000")),
                ("init", Some("single")),
                ("snapshot", Some("")),
                ("tv_threshold", Some("0.02")),
                ("cap", Some("8")),
                ("top_k", Some("10")),
            ],
            Command::Sweep => &[
                ("seed", None),
                ("format", Some("csv")),
                ("lambdas", Some("1.2,2.0")),
                ("alphas", Some("0")),
                ("d", Some("1")),
                ("side", Some("200")),
                ("boundary", Some("periodic")),
                ("engine", Some("gillespie")),
                ("mode", Some("rumor")),
                ("criterion", Some("spreaders-only")),
                ("t_max", Some("200")),
                ("replicas", Some("1000")),
                ("init", Some("single")),
                ("spreader_density", Some("0.1")),
                ("stifler_density", Some("0")),
            ],
            Command::Block => &[
                ("seed", None),
                ("format", Some("json")),
                ("block", Some("a")),
                ("lambda", Some("3")),
                ("alpha", Some("0")),
                ("d", Some("1")),
                ("L", Some("25")),
                ("T", Some("")),
                ("replicas", Some("500")),
                ("placement", Some("uniform")),
                ("boundary_policy", Some("all-spreaders")),
            ],
        }
    }
}

/// Fully resolved key/value set for one invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    command: Command,
    values: BTreeMap<String, String>,
}

pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key = value, got {raw:?}", n + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

pub fn parse_assignment(s: &str) -> Result<(String, String), CliError> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .ok_or_else(|| CliError::Config(format!("expected KEY=VALUE, got {s:?}")))
}

impl RunConfig {
    /// Layers `file` then `overrides` over the defaults of `command`.
    pub fn resolve(
        command: Command,
        file: &[(String, String)],
        overrides: &[(String, String)],
    ) -> Result<Self, CliError> {
        let keys = command.keys();
        let mut values = BTreeMap::new();
        for (k, v) in file.iter().chain(overrides) {
            if !keys.iter().any(|(name, _)| name == k) {
                return Err(CliError::Config(format!("unknown key {k:?} for `{}`", command.name())));
            }
            values.insert(k.clone(), v.clone());
        }
        for (k, default) in keys {
            if !values.contains_key(*k) {
                match default {
                    Some(d) => {
                        values.insert((*k).to_string(), (*d).to_string());
                    }
                    None if *k == "seed" => {
                        return Err(CliError::Config(
                            "no seed given; pass --seed or set `seed` in the config file".into(),
                        ))
                    }
                    None => return Err(CliError::Config(format!("missing required key {k:?}"))),
                }
            }
        }
        Ok(RunConfig { command, values })
    }

    pub fn command(&self) -> Command {
        self.command
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or_else(|| {
            panic!("key {key:?} is not defined for `{}`", self.command.name())
        })
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse().map_err(|e| CliError::Config(format!("{key} = {raw:?}: {e}")))
    }

    pub fn list(&self, key: &str) -> Result<Vec<f64>, CliError> {
        self.raw(key)
            .split(',')
            .map(|s| {
                s.trim().parse::<f64>().map_err(|e| CliError::Config(format!("{key}: {s:?}: {e}")))
            })
            .collect()
    }

    pub fn seed(&self) -> Result<u64, CliError> {
        self.get("seed")
    }

    #[cfg(test)]
    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// `# ` prefixed lines recording the command and every resolved key.
    pub fn csv_header(&self) -> String {
        let mut s = format!("# rumor {}\n", self.command.name());
        for (k, v) in &self.values {
            s.push_str(&format!("# {k}={v}\n"));
        }
        s
    }

    pub fn json(&self) -> serde_json::Value {
        let mut map = serde_json::Map::new();
        map.insert("command".into(), self.command.name().into());
        for (k, v) in &self.values {
            map.insert(k.clone(), v.clone().into());
        }
        serde_json::Value::Object(map)
    }
}
