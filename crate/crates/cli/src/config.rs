//! Run configuration: a JSON file overridden field by field by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::{Map, Value};
use warpcone::actions::ActionParams;
use warpcone::operators::CoarseMode;
use warpcone::spaces::{ModelSpace, NetStrategy};
use warpcone::warped::SnapMode;

/// Output directory used when neither the config nor `--out` names one.
pub const DEFAULT_OUT: &str = "warpcone-out";

/// Scaled radius `r`, or `auto` for the largest admissible radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Radius {
    Auto,
    Value(f64),
}

impl FromStr for Radius {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Radius::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Radius::Value(v)),
            _ => Err(format!("r must be a positive number or 'auto', got '{s}'")),
        }
    }
}

impl fmt::Display for Radius {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Radius::Auto => f.write_str("auto"),
            Radius::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for Radius {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Radius::Auto => s.serialize_str("auto"),
            Radius::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for Radius {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match Value::deserialize(d)? {
            Value::Number(n) => n
                .as_f64()
                .map(|v| v.to_string())
                .ok_or_else(|| serde::de::Error::custom("r is not a finite number"))?
                .parse()
                .map_err(serde::de::Error::custom),
            Value::String(s) => s.parse().map_err(serde::de::Error::custom),
            other => Err(serde::de::Error::custom(format!("r must be a number or 'auto', got {other}"))),
        }
    }
}

/// Every setting a command may read. JSON keys match the flag names.
#[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    /// Action family from the catalog, e.g. circle-rotation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
    /// Rotation number of circle-rotation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Translation vector of torus-translation (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vector: Option<Vec<f64>>,
    /// Torus dimension of torus-translation.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    /// Rotation angle of so3-rational-rotations.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub angle: Option<f64>,
    /// Cantor depth of the odometer.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    /// Model space: circle, torus<m>, so3 or cantor<depth>.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub space: Option<String>,
    /// Single level t.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Strictly increasing levels (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub levels: Option<Vec<f64>>,
    /// Net separation in the scaled metric.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    /// Scaled radius, or auto.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Radius>,
    /// Random seed (default 0).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Output directory (default warpcone-out).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Net construction: auto, greedy or arithmetic.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub net: Option<NetStrategy>,
    /// Where generator images sit: snap or exact-offnet.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub snap: Option<SnapMode>,
    /// Metric edge cutoff in the scaled metric (default 3ε).
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cutoff: Option<f64>,
    /// Operator for `spectrum`: coarse, local or group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub operator: Option<String>,
    /// Coarse Laplacian assembly: direct or composed.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode: Option<CoarseMode>,
    /// Number of eigenvalues.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    /// Eigensolver: auto, dense or lanczos.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub solver: Option<String>,
    /// Also write the assembled operator in coordinate format.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub export_operator: Option<bool>,
    /// Largest eigenvalue bound for `weyl`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmax: Option<f64>,
    /// Grid size for `weyl`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Window factor for `accumulate`: the window is [ε, factor·ε].
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub factor: Option<f64>,
    /// Largest frequency for `sandwich`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kmax: Option<u64>,
    /// Additive slack of the upper sandwich inequality.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_target: Option<f64>,
    /// Random sections for `invariant`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sections: Option<usize>,
    /// Bottom eigenvalues compared in the joint spectrum.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bottom: Option<usize>,
    /// Margin of the joint-spectrum region.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    /// Cantor depths for `boxcompare` (comma separated).
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depths: Option<Vec<u32>>,
    /// Lower bound on the normalized gap of expander families.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<f64>,
    /// Override of the command's pass tolerance.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
}

impl RunConfig {
    /// Reads `path` (if any) and lets every flag that was given replace the file's value.
    pub fn load(path: Option<&Path>, flags: &RunConfig) -> Result<Self> {
        let mut merged = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                match serde_json::from_str::<Value>(&text).with_context(|| format!("parsing config {}", p.display()))? {
                    Value::Object(m) => m,
                    _ => bail!("config {} must be a JSON object", p.display()),
                }
            }
            None => Map::new(),
        };
        if let Value::Object(overrides) = serde_json::to_value(flags)? {
            merged.extend(overrides);
        }
        let config: RunConfig = serde_json::from_value(Value::Object(merged)).context("invalid config")?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(levels) = &self.levels {
            if levels.is_empty() {
                bail!("levels must not be empty");
            }
            if levels.iter().any(|t| !(*t > 0.0) || !t.is_finite()) {
                bail!("levels must be positive and finite, got {levels:?}");
            }
            if levels.windows(2).any(|w| !(w[0] < w[1])) {
                bail!("levels must be strictly increasing, got {levels:?}");
            }
        }
        for (name, v) in [("t", self.t), ("epsilon", self.epsilon), ("rmax", self.rmax), ("factor", self.factor)] {
            if let Some(v) = v {
                if !(v > 0.0) || !v.is_finite() {
                    bail!("{name} must be positive and finite, got {v}");
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn epsilon_or(&self, default: f64) -> f64 {
        self.epsilon.unwrap_or(default)
    }

    pub fn action_name(&self) -> Result<&str> {
        self.action.as_deref().context("no action given (set `action` or --action)")
    }

    pub fn action_params(&self) -> ActionParams {
        ActionParams {
            alpha: self.alpha,
            vector: self.vector.clone(),
            dim: self.dim,
            angle: self.angle,
            depth: self.depth,
            space: self.space.clone(),
            level: None,
        }
    }

    pub fn model_space(&self) -> Result<ModelSpace> {
        let s = self.space.as_deref().context("no space given (set `space` or --space)")?;
        Ok(s.parse()?)
    }

    /// `levels`, or `[t]` when only `t` is given.
    pub fn level_list(&self) -> Result<Vec<f64>> {
        match (&self.levels, self.t) {
            (Some(levels), None) => Ok(levels.clone()),
            (None, Some(t)) => Ok(vec![t]),
            (Some(_), Some(_)) => bail!("give either t or levels, not both"),
            (None, None) => bail!("no level given (set t or levels)"),
        }
    }

    pub fn single_level(&self) -> Result<f64> {
        match self.level_list()?.as_slice() {
            [t] => Ok(*t),
            many => bail!("this command takes one level, got {many:?}"),
        }
    }
}
