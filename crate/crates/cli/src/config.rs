use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use cubature_core::{BasisSpec, MeasureFormat};
use serde::Deserialize;

/// Everything a run can be told. Loaded from `--config`, then overridden
/// field by field from the command line.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub mode: Option<String>,
    pub basis: Option<PartialBasis>,
    pub input: Option<PathBuf>,
    pub format: Option<String>,
    pub out_dir: Option<PathBuf>,
    pub buffer_factor: Option<usize>,
    pub tol: Option<f64>,
    pub seed: Option<u64>,
    pub grid: Option<PathBuf>,
    pub cubature: Option<PathBuf>,
    pub num_atoms: Option<usize>,
}

/// Basis block where every field may be left for flags or the input to fill in.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialBasis {
    pub num_vars: Option<usize>,
    pub degree_weights: Option<Vec<u32>>,
    pub max_degree: Option<u32>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn validate(&self, subcommand: &str) -> Result<()> {
        if let Some(mode) = &self.mode {
            if !["reduce", "moments", "feasible", "verify", "gen"].contains(&mode.as_str()) {
                bail!("unknown mode {mode:?} in config");
            }
            if mode != subcommand {
                eprintln!("note: config mode {mode:?} overridden by subcommand {subcommand:?}");
            }
        }
        if let Some(tol) = self.tol {
            if !(tol > 0.0 && tol.is_finite()) {
                bail!("tolerance must be positive, got {tol}");
            }
        }
        if let Some(bf) = self.buffer_factor {
            if bf < 2 {
                bail!("buffer factor must be at least 2, got {bf}");
            }
        }
        Ok(())
    }

    pub fn basis(&self) -> PartialBasis {
        self.basis.clone().unwrap_or_default()
    }

    pub fn format(&self) -> Result<Option<MeasureFormat>> {
        self.format.as_deref().map(|f| f.parse::<MeasureFormat>().map_err(anyhow::Error::from)).transpose()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn tol(&self) -> f64 {
        self.tol.unwrap_or(1e-8)
    }

    pub fn input(&self) -> Result<&Path> {
        self.input.as_deref().context("no input file given (use --input or \"input\" in the config)")
    }
}

impl PartialBasis {
    /// Number of variables implied so far, if any.
    pub fn num_vars_hint(&self) -> Option<usize> {
        self.num_vars.or(self.degree_weights.as_ref().map(Vec::len))
    }

    pub fn resolve(&self, num_vars: usize) -> Result<BasisSpec> {
        let max_degree = self.max_degree.context("no degree given (use --degree or basis.max_degree)")?;
        if let Some(w) = &self.degree_weights {
            if w.len() != num_vars {
                bail!("{} degree weights given for {num_vars} variables", w.len());
            }
        }
        Ok(BasisSpec { num_vars, degree_weights: self.degree_weights.clone(), max_degree })
    }
}

pub fn parse_weights(s: &str) -> Result<Vec<u32>> {
    s.split(',')
        .map(|t| t.trim().parse::<u32>().with_context(|| format!("bad degree weight {t:?}")))
        .collect()
}
