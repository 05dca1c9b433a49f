//! Flat `key = value` configuration files and flag/file/default resolution.
//!
//! Every diagnostic names its source: the config file line that set a key,
//! the flag that supplied it, or the file itself for missing keys. The
//! resolver keeps collecting problems instead of stopping at the first, so
//! one pass reports everything wrong with a configuration.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::{self, Display};
use std::path::Path;
use std::str::FromStr;

/// Parsed config file: raw values plus the line each key was set on.
pub struct FileConfig {
    label: String,
    entries: HashMap<String, (String, usize)>,
}

impl FileConfig {
    /// Reads and tokenizes a config file, appending syntax problems to
    /// `diags`. Returns None only when the file cannot be read at all.
    pub fn load(path: &Path, diags: &mut Vec<String>) -> Option<FileConfig> {
        let label = path.display().to_string();
        let text = match std::fs::read_to_string(path) {
            Ok(text) => text,
            Err(err) => {
                diags.push(format!("{label}: cannot read config: {err}"));
                return None;
            }
        };
        let mut entries: HashMap<String, (String, usize)> = HashMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let stripped = raw.split('#').next().unwrap_or("").trim();
            if stripped.is_empty() {
                continue;
            }
            let Some((key, value)) = stripped.split_once('=') else {
                diags.push(format!("{label}:{line}: expected `key = value`"));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if key.is_empty()
                || !key
                    .chars()
                    .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
            {
                diags.push(format!(
                    "{label}:{line}: key must be lower_snake_case, got \"{key}\""
                ));
                continue;
            }
            if value.is_empty() {
                diags.push(format!("{label}:{line}: key \"{key}\" has no value"));
                continue;
            }
            if let Some((_, first)) = entries.insert(key.to_string(), (value.to_string(), line)) {
                diags.push(format!(
                    "{label}:{line}: duplicate key \"{key}\" (first set on line {first})"
                ));
            }
        }
        Some(FileConfig { label, entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(value, _)| value.as_str())
    }

    pub fn location(&self, key: &str) -> Option<String> {
        self.entries
            .get(key)
            .map(|(_, line)| format!("{}:{line}", self.label))
    }
}

/// Merges flag values over file values over defaults, tracking where each
/// resolved value came from so later constraint violations can point at it.
pub struct Resolver {
    file: Option<FileConfig>,
    pub diags: Vec<String>,
    /// Final value of every key, echoed into summary.json.
    pub resolved: BTreeMap<String, String>,
    locations: HashMap<String, String>,
    consumed: HashSet<String>,
}

impl Resolver {
    pub fn new(file: Option<FileConfig>, diags: Vec<String>) -> Self {
        Resolver {
            file,
            diags,
            resolved: BTreeMap::new(),
            locations: HashMap::new(),
            consumed: HashSet::new(),
        }
    }

    fn source_label(&self) -> &str {
        self.file.as_ref().map_or("config", |f| f.label.as_str())
    }

    fn file_entry(&mut self, key: &str) -> Option<(String, String)> {
        self.consumed.insert(key.to_string());
        let file = self.file.as_ref()?;
        let (value, line) = file.entries.get(key)?;
        Some((value.clone(), format!("{}:{line}", file.label)))
    }

    /// Marks a key as handled without reading it through the schema.
    pub fn consume(&mut self, key: &str) {
        self.consumed.insert(key.to_string());
    }

    /// Key that must come from a flag or the file.
    pub fn required<T: FromStr + Display>(&mut self, key: &str, flag: Option<T>) -> Option<T> {
        self.fetch(key, flag, None, true)
    }

    /// Key with a default.
    pub fn optional<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: T,
    ) -> Option<T> {
        self.fetch(key, flag, Some(default), false)
    }

    fn fetch<T: FromStr + Display>(
        &mut self,
        key: &str,
        flag: Option<T>,
        default: Option<T>,
        required: bool,
    ) -> Option<T> {
        let entry = self.file_entry(key);
        if let Some(value) = flag {
            self.locations
                .insert(key.to_string(), format!("--{}", key.replace('_', "-")));
            self.resolved.insert(key.to_string(), value.to_string());
            return Some(value);
        }
        if let Some((raw, location)) = entry {
            return match raw.parse::<T>() {
                Ok(value) => {
                    self.locations.insert(key.to_string(), location);
                    self.resolved.insert(key.to_string(), value.to_string());
                    Some(value)
                }
                Err(_) => {
                    self.diags.push(format!(
                        "{location}: cannot parse \"{raw}\" as {} for key \"{key}\"",
                        short_type_name::<T>()
                    ));
                    None
                }
            };
        }
        match default {
            Some(value) => {
                self.locations
                    .insert(key.to_string(), "default".to_string());
                self.resolved.insert(key.to_string(), value.to_string());
                Some(value)
            }
            None => {
                if required {
                    self.diags.push(format!(
                        "{}: missing required key \"{key}\" (flag --{})",
                        self.source_label(),
                        key.replace('_', "-")
                    ));
                }
                None
            }
        }
    }

    /// Records a constraint violation against the location that set `key`.
    pub fn violation(&mut self, key: &str, message: impl Display) {
        let location = self
            .locations
            .get(key)
            .cloned()
            .unwrap_or_else(|| self.source_label().to_string());
        self.diags.push(format!("{location}: {message}"));
    }

    /// Consumes the `model` key and checks that it names the invoked command.
    pub fn model_gate(&mut self, expected: &str) {
        if let Some((value, location)) = self.file_entry("model") {
            if value != expected {
                self.diags.push(format!(
                    "{location}: config declares model \"{value}\" but the \"{expected}\" command was invoked"
                ));
            }
        }
        self.resolved
            .insert("model".to_string(), expected.to_string());
    }

    /// Flags file keys that no schema consumed (typos, stale keys).
    pub fn finish(&mut self) {
        let Some(file) = &self.file else { return };
        let mut unknown: Vec<(usize, String)> = file
            .entries
            .iter()
            .filter(|(key, _)| !self.consumed.contains(*key))
            .map(|(key, (_, line))| (*line, key.clone()))
            .collect();
        unknown.sort();
        for (line, key) in unknown {
            self.diags
                .push(format!("{}:{line}: unknown key \"{key}\"", file.label));
        }
    }
}

fn short_type_name<T>() -> &'static str {
    std::any::type_name::<T>()
        .rsplit("::")
        .next()
        .unwrap_or("value")
}

/// Comma-separated unsigned integers, e.g. "10,30,100".
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct U64List(pub Vec<u64>);

impl FromStr for U64List {
    type Err = std::num::ParseIntError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|part| part.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(U64List)
    }
}

impl Display for U64List {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(u64::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Comma-separated floats, e.g. "0.5,3".
#[derive(Debug, Clone, PartialEq)]
pub struct F64List(pub Vec<f64>);

impl FromStr for F64List {
    type Err = std::num::ParseFloatError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split(',')
            .map(|part| part.trim().parse())
            .collect::<Result<Vec<_>, _>>()
            .map(F64List)
    }
}

impl Display for F64List {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(f64::to_string).collect();
        write!(f, "{}", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl FromStr for OutputFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown format \"{other}\"")),
        }
    }
}

impl Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum NoiseKind {
    Zero,
    #[value(name = "two_point")]
    TwoPoint,
    Uniform,
}

impl FromStr for NoiseKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "zero" => Ok(NoiseKind::Zero),
            "two_point" => Ok(NoiseKind::TwoPoint),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(format!("unknown noise kind \"{other}\"")),
        }
    }
}

impl Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Zero => "zero",
            NoiseKind::TwoPoint => "two_point",
            NoiseKind::Uniform => "uniform",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum StartKind {
    /// Uniform bump over [bump_lo, bump_hi].
    Bump,
    /// The stationary profile itself (fixed-point regression runs).
    Stationary,
}

impl FromStr for StartKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bump" => Ok(StartKind::Bump),
            "stationary" => Ok(StartKind::Stationary),
            other => Err(format!("unknown start kind \"{other}\"")),
        }
    }
}

impl Display for StartKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StartKind::Bump => "bump",
            StartKind::Stationary => "stationary",
        })
    }
}
