//! Run configuration: command-line flags layered over an optional JSON file.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::Deserialize;

/// Flags shared by all subcommands. Every field is optional here; each command
/// checks for what it needs after merging with `--config`.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    /// Plant trajectory CSV (all channels, in model variable order).
    #[arg(long)]
    pub plant: Option<PathBuf>,

    /// Reference trajectory CSV (the `w` channels).
    #[arg(long = "ref")]
    #[serde(rename = "ref")]
    pub reference: Option<PathBuf>,

    /// State-space model JSON.
    #[arg(long)]
    pub model: Option<PathBuf>,

    /// Output file.
    #[arg(long)]
    pub out: Option<PathBuf>,

    /// Horizon L.
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub horizon: Option<usize>,

    /// Number of samples for `simulate`.
    #[arg(long = "T")]
    #[serde(rename = "T")]
    pub samples: Option<usize>,

    /// Upper bound on the lags of the plant, the reference and the uncontrolled plant.
    #[arg(long)]
    pub lag_bound: Option<usize>,

    /// Input-cardinality bound: `plant` or `plant,ref`.
    #[arg(long, value_delimiter = ',')]
    pub m_bound: Option<Vec<usize>>,

    /// State-dimension bound: `plant` or `plant,ref`.
    #[arg(long, value_delimiter = ',')]
    pub n_bound: Option<Vec<usize>>,

    /// Relative rank tolerance.
    #[arg(long)]
    pub tol: Option<f64>,

    #[arg(long)]
    pub seed: Option<u64>,

    /// 1-based plant channels that form `w`.
    #[arg(long, value_delimiter = ',')]
    pub picks_w: Option<Vec<usize>>,

    /// 1-based plant channels that form `c`.
    #[arg(long, value_delimiter = ',')]
    pub picks_c: Option<Vec<usize>>,

    /// Number of random cases for `proptest`.
    #[arg(long)]
    pub cases: Option<usize>,

    /// Largest `w`/`c` channel count and plant order for `proptest`.
    #[arg(long)]
    pub max_q: Option<usize>,
    #[arg(long)]
    pub max_k: Option<usize>,
    #[arg(long)]
    pub max_order: Option<usize>,

    /// JSON file with any of the above (kebab-case keys); flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

macro_rules! overlay {
    ($flags:expr, $file:expr, $($field:ident),*) => {
        RunConfig { $($field: $flags.$field.or($file.$field),)* config: None }
    };
}

impl RunConfig {
    /// Loads `--config` if given and fills every unset flag from it.
    fn resolve(self) -> Result<Self, String> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = read(&path)?;
        let file: RunConfig =
            serde_json::from_str(&text).map_err(|e| format!("config {}: {e}", path.display()))?;
        let merged = overlay!(
            self, file, plant, reference, model, out, horizon, samples, lag_bound, m_bound, n_bound, tol, seed,
            picks_w, picks_c, cases, max_q, max_k, max_order
        );
        Ok(merged)
    }

    fn validate(&self) -> Result<(), String> {
        if self.horizon == Some(0) {
            return Err("L must be at least 1".into());
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(format!("tolerance must be positive, got {t}"));
            }
        }
        Ok(())
    }

    pub fn checked(self) -> Result<Self, String> {
        let merged = self.resolve()?;
        merged.validate()?;
        Ok(merged)
    }
}

pub fn require<T: Clone>(value: &Option<T>, flag: &str) -> Result<T, String> {
    value.clone().ok_or_else(|| format!("missing --{flag}"))
}

pub fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

/// `[x]` or `[plant, ref]` into a pair.
pub fn pair(values: &[usize], flag: &str) -> Result<(usize, usize), String> {
    match values {
        [x] => Ok((*x, *x)),
        [p, r] => Ok((*p, *r)),
        _ => Err(format!("--{flag} takes one value or `plant,ref`")),
    }
}
