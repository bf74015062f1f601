//! Layered configuration: defaults, then a JSON file, then command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use molgrad::experiments::{NoiseLevel, ProblemSpec, SignalSpec};

pub const OUT_ENV: &str = "MOLGRAD_OUT";

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(molgrad::Error),
    /// Certification ran but did not pass.
    Rejected,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Rejected => 1,
            CliError::Core(e) => core_exit_code(e),
        }
    }
}

fn core_exit_code(e: &molgrad::Error) -> i32 {
    use molgrad::Error as E;
    match e {
        E::StepSize { .. } => 3,
        E::Divergence { .. } => 4,
        E::SweepAborted { source, .. } => core_exit_code(source),
        E::Io(_) => 1,
        _ => 2,
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Rejected => write!(f, "certification verdict: fail"),
        }
    }
}

impl From<molgrad::Error> for CliError {
    fn from(e: molgrad::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

/// Flag values to lay over the file configuration. Keys may be dotted paths
/// into nested objects.
#[derive(Default)]
pub struct Overrides(Map<String, Value>);

impl Overrides {
    pub fn set<T: Serialize>(&mut self, path: &str, value: Option<T>) -> &mut Self {
        if let Some(v) = value {
            let v = serde_json::to_value(v).expect("flag values serialize");
            let mut parts = path.split('.').peekable();
            let mut node = &mut self.0;
            while let Some(key) = parts.next() {
                if parts.peek().is_none() {
                    node.insert(key.to_string(), v);
                    break;
                }
                node = node
                    .entry(key.to_string())
                    .or_insert_with(|| Value::Object(Map::new()))
                    .as_object_mut()
                    .expect("override paths do not clash");
            }
        }
        self
    }

    pub fn flag(&mut self, path: &str, on: bool) -> &mut Self {
        self.set(path, on.then_some(true))
    }
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (b, p) => *b = p,
    }
}

/// Reads a config file; an emitted manifest is accepted in place of a plain
/// config object.
fn load_file(command: &str, path: &Path) -> CliResult<Value> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Usage(format!("{} is not valid JSON: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Usage(format!(
            "{} must hold a JSON object",
            path.display()
        )));
    };
    if let (Some(Value::String(cmd)), Some(cfg)) = (obj.get("command"), obj.get("config")) {
        if cmd != command {
            return Err(CliError::Usage(format!(
                "manifest was written by '{cmd}', not '{command}'"
            )));
        }
        return Ok(cfg.clone());
    }
    obj.remove("command");
    Ok(Value::Object(obj))
}

pub fn resolve<T>(command: &str, file: Option<&Path>, overrides: Overrides) -> CliResult<T>
where
    T: Serialize + DeserializeOwned + Default,
{
    let mut value = serde_json::to_value(T::default()).expect("defaults serialize");
    if let Some(path) = file {
        merge(&mut value, load_file(command, path)?);
    }
    merge(&mut value, Value::Object(overrides.0));
    serde_json::from_value(value)
        .map_err(|e| CliError::Usage(format!("invalid configuration: {e}")))
}

/// Flag, then `MOLGRAD_OUT`, then the current directory.
pub fn output_dir(flag: Option<PathBuf>) -> PathBuf {
    flag.or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// Synthetic problem shape shared by the experiment commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// Defaults to 64, or 256 with `paper_scale`.
    pub n: Option<usize>,
    /// Defaults to `4n`.
    pub m: Option<usize>,
    pub pieces: usize,
    pub level_lo: f64,
    pub level_hi: f64,
    /// Noise standard deviation relative to `|A x| / sqrt(m)`.
    pub noise_factor: f64,
    /// Absolute noise standard deviation; takes precedence when set.
    pub noise_std: Option<f64>,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        let s = SignalSpec::default();
        Self {
            n: None,
            m: None,
            pieces: s.n_pieces,
            level_lo: s.level_lo,
            level_hi: s.level_hi,
            noise_factor: 0.1,
            noise_std: None,
        }
    }
}

impl ProblemConfig {
    /// Fills in the scale-dependent dimensions.
    pub fn settle(&mut self, paper_scale: bool) {
        let n = *self.n.get_or_insert(if paper_scale { 256 } else { 64 });
        self.m.get_or_insert(4 * n);
    }

    pub fn spec(&self, seed: u64) -> ProblemSpec {
        let n = self.n.expect("settled");
        ProblemSpec {
            n,
            m: self.m.expect("settled"),
            noise: match self.noise_std {
                Some(s) => NoiseLevel::Absolute(s),
                None => NoiseLevel::Relative(self.noise_factor),
            },
            signal: SignalSpec {
                n_pieces: self.pieces,
                level_lo: self.level_lo,
                level_hi: self.level_hi,
            },
            seed,
        }
    }
}
