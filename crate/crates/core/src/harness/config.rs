//! Run configuration: defaults, a plain `key=value` file format and flag
//! overrides. Flags and file keys share names; dashes and underscores are
//! interchangeable.

use std::path::{Path, PathBuf};

use crate::apps::{AppKind, WorkloadConfig};
use crate::error::ConfigError;
use crate::restructure::{Placement, PlacementPolicy};
use crate::scheduler::{EngineConfig, Scheme};

/// Runs up to this many events check against the serial oracle by default.
pub const ORACLE_DEFAULT_LIMIT: usize = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub app: AppKind,
    pub scheme: Scheme,
    pub threads: usize,
    pub interval: usize,
    pub events: usize,
    /// `None` picks the app's default.
    pub skew: Option<f64>,
    pub read_ratio: f64,
    pub mp_ratio: f64,
    pub mp_length: usize,
    pub partitions: usize,
    pub placement: Placement,
    pub seed: u64,
    /// `None` means the first 10% of events.
    pub warmup_events: Option<usize>,
    pub initial_balance: Option<i64>,
    /// `None` means on for runs up to [`ORACLE_DEFAULT_LIMIT`] events.
    pub oracle: Option<bool>,
    pub output: Option<PathBuf>,
    /// Write the chain-evaluation trace here.
    pub trace: Option<PathBuf>,
    /// Write the generated input stream here.
    pub dump_events: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            app: AppKind::Gs,
            scheme: Scheme::TStream,
            threads: 1,
            interval: 500,
            events: 100_000,
            skew: None,
            read_ratio: 0.5,
            mp_ratio: 0.25,
            mp_length: 4,
            partitions: 8,
            placement: Placement::SharedNothing,
            seed: 1,
            warmup_events: None,
            initial_balance: None,
            oracle: None,
            output: None,
            trace: None,
            dump_events: None,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse()
        .map_err(|_| ConfigError::Invalid(format!("bad value {value:?} for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" | "on" => Ok(true),
        "0" | "false" | "no" | "off" => Ok(false),
        _ => Err(ConfigError::Invalid(format!("bad value {value:?} for {key}"))),
    }
}

impl RunConfig {
    /// Sets one option by name.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim().trim_start_matches("--").replace('-', "_");
        let v = value.trim();
        match key.as_str() {
            "app" => self.app = v.parse()?,
            "scheme" => self.scheme = v.parse()?,
            "threads" => self.threads = parse(&key, v)?,
            "interval" => self.interval = parse(&key, v)?,
            "events" | "event_count" => self.events = parse(&key, v)?,
            "skew" => self.skew = Some(parse(&key, v)?),
            "read_ratio" => self.read_ratio = parse(&key, v)?,
            "mp_ratio" => self.mp_ratio = parse(&key, v)?,
            "mp_length" => self.mp_length = parse(&key, v)?,
            "partitions" => self.partitions = parse(&key, v)?,
            "placement" => self.placement = v.parse()?,
            "seed" => self.seed = parse(&key, v)?,
            "warmup_events" => self.warmup_events = Some(parse(&key, v)?),
            "initial_balance" => self.initial_balance = Some(parse(&key, v)?),
            "oracle" => self.oracle = Some(parse_bool(&key, v)?),
            "output" => self.output = Some(v.into()),
            "trace" => self.trace = Some(v.into()),
            "dump_events" => self.dump_events = Some(v.into()),
            _ => return Err(ConfigError::Invalid(format!("unknown option {key:?}"))),
        }
        Ok(())
    }

    /// Applies `key=value` lines. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<(), ConfigError> {
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                ConfigError::Invalid(format!("line {}: expected key=value, got {line:?}", n + 1))
            })?;
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    pub fn warmup(&self) -> usize {
        self.warmup_events.unwrap_or(self.events / 10)
    }

    pub fn oracle_enabled(&self) -> bool {
        self.oracle.unwrap_or(self.events <= ORACLE_DEFAULT_LIMIT)
    }

    pub fn workload(&self) -> WorkloadConfig {
        let mut w = WorkloadConfig::new(self.app);
        if let Some(s) = self.skew {
            w.skew = s;
        }
        w.read_ratio = self.read_ratio;
        w.mp_ratio = self.mp_ratio;
        w.mp_length = self.mp_length;
        w.partitions = self.partitions;
        w.seed = self.seed;
        w.event_count = self.events;
        if let Some(b) = self.initial_balance {
            w.initial_balance = b;
        }
        w
    }

    pub fn engine(&self, record_results: bool) -> EngineConfig {
        EngineConfig {
            executors: self.threads,
            interval: self.interval,
            scheme: self.scheme,
            placement: PlacementPolicy::new(self.placement),
            partitions: self.partitions,
            record_results,
            trace: self.trace.is_some(),
            queue_capacity: 0,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.threads == 0 {
            return Err(ConfigError::Invalid("threads must be at least 1".into()));
        }
        if self.interval == 0 {
            return Err(ConfigError::Invalid("interval must be at least 1".into()));
        }
        if self.events == 0 {
            return Err(ConfigError::Invalid("events must be at least 1".into()));
        }
        if self.warmup() >= self.events {
            return Err(ConfigError::Invalid(format!(
                "warmup_events {} must be below events {}",
                self.warmup(),
                self.events
            )));
        }
        self.workload().validate()?;
        self.engine(false).validate()
    }
}
