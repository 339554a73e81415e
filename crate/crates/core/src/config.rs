//! Flat `key = value` configuration files with per-key overrides.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are unique.
//! The digest of a config is the SHA-256 of its canonical form (keys sorted,
//! one `key=value` per line), so any artifact can name the config it came from.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KvConfig {
    entries: BTreeMap<String, String>,
}

impl KvConfig {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = KvConfig::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::config(line, format!("line {}: expected key = value", lineno + 1)))?;
            let key = k.trim();
            if key.is_empty() {
                return Err(Error::config("", format!("line {}: empty key", lineno + 1)));
            }
            if cfg.entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(Error::config(key, format!("line {}: duplicate key", lineno + 1)));
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Apply a `key=value` override.
    pub fn set_override(&mut self, spec: &str) -> Result<()> {
        let (k, v) = spec.split_once('=').ok_or_else(|| Error::config(spec, "override must be key=value"))?;
        self.set(k.trim(), v.trim());
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn get_str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some(v) => v.parse::<T>().map(Some).map_err(|e| Error::config(key, format!("`{v}`: {e}"))),
        }
    }

    pub fn get_or<T: FromStr>(&self, key: &str, default: T) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn get_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>>
    where
        T::Err: std::fmt::Display,
    {
        let Some(v) = self.entries.get(key) else { return Ok(None) };
        v.split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<T>().map_err(|e| Error::config(key, format!("`{s}`: {e}"))))
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    /// Fail on the first key that is neither listed nor matches a listed `prefix.*`.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for key in self.entries.keys() {
            let ok = known.iter().any(|k| match k.strip_suffix('*') {
                Some(prefix) => key.starts_with(prefix),
                None => k == key,
            });
            if !ok {
                return Err(Error::config(key.as_str(), "unknown key"));
            }
        }
        Ok(())
    }

    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(s, "{k}={v}");
        }
        s
    }

    pub fn digest(&self) -> [u8; 32] {
        Sha256::digest(self.canonical().as_bytes()).into()
    }

    pub fn digest_hex(&self) -> String {
        hex::encode(self.digest())
    }
}

/// Every key the tool understands; `fault.*` entries name branch ids.
pub const KNOWN_KEYS: &[&str] = &[
    // topology
    "feeder_length_m",
    "split_ratio",
    "branch_lengths_m",
    "min_gap_m",
    "max_gap_m",
    // simulation
    "pulse_width_ns",
    "sample_interval_ns",
    "wavelength_nm",
    "group_index",
    "attenuation_db_per_km",
    "splitter_loss_db",
    "reflector_return_db",
    "trace_len",
    "dynamic_range_db",
    // scenario
    "fault.*",
    "feeder_extra_loss_db",
    "max_simultaneous_faults",
    // datasets
    "pnr_min",
    "pnr_max",
    "per_class_count",
    "attenuation_min_db",
    "attenuation_max_db",
    "break_fraction",
    "region_lead",
    "region_len",
    "target_count",
    "scenario_count",
    "random_branches_min",
    "random_branches_max",
    "feeder_loss_min_db",
    "feeder_loss_max_db",
    "window_len",
    "faulty_level_threshold",
    "balance_ratio",
    "generic_branches",
    "generic_fault_probability",
    "generic_attenuation_min_db",
    "generic_attenuation_max_db",
    "generic_break_probability",
    "split_train",
    "split_val",
    "split_test",
    // training
    "learning_rate",
    "batch_size",
    "max_epochs",
    "patience",
    "task_weights",
    "clip_norm",
    "gru_widths",
    "lstm_hidden",
    // monitoring
    "threshold",
    "match_tolerance",
    "monitor_stride",
];
