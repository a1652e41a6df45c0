//! Run manifests: one TOML document per analysis.

use std::fmt;
use std::path::{Path, PathBuf};

use hg_core::QuadratureConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Evaluate,
    Norms,
    BlowupMap,
    Oscillate,
    Trace,
    TraceSolve,
    Classify,
    Shadow,
    Rescale,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).expect("unit variant");
        f.write_str(s.as_str().expect("string"))
    }
}

/// Measure documents read by the command, relative to the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Inputs {
    pub measure: Option<PathBuf>,
    /// Data spliced outside the ball by `shadow`.
    pub outer: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub command: Command,
    #[serde(default)]
    pub inputs: Inputs,
    /// CSV destination, relative to the manifest.
    pub output: PathBuf,
    /// JSON summary destination; defaults to the output with a `.json`
    /// extension.
    pub summary: Option<PathBuf>,
    #[serde(default)]
    pub quadrature: QuadratureConfig,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "empty_table")]
    pub params: toml::Value,
}

fn empty_table() -> toml::Value {
    toml::Value::Table(toml::Table::new())
}

impl RunManifest {
    pub fn parse(text: &str) -> Result<RunManifest, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("manifest: {e}")))
    }

    /// Reads a manifest and resolves its relative paths against its
    /// directory.
    pub fn read(path: &Path) -> Result<RunManifest, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
        let mut m = RunManifest::parse(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        m.resolve(base);
        Ok(m)
    }

    pub fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output);
        if let Some(s) = self.summary.as_mut() {
            fix(s);
        }
        if let Some(s) = self.inputs.measure.as_mut() {
            fix(s);
        }
        if let Some(s) = self.inputs.outer.as_mut() {
            fix(s);
        }
    }

    pub fn summary_path(&self) -> PathBuf {
        self.summary.clone().unwrap_or_else(|| self.output.with_extension("json"))
    }

    /// Command parameters, rejecting unknown keys.
    pub fn params<T: for<'de> Deserialize<'de>>(&self) -> Result<T, CliError> {
        self.params
            .clone()
            .try_into()
            .map_err(|e| CliError::Validation(format!("params for {}: {e}", self.command)))
    }

    /// Checks that referenced files exist and the output directory is
    /// writable.
    pub fn validate(&self) -> Result<(), CliError> {
        self.quadrature.validate()?;
        for p in [&self.inputs.measure, &self.inputs.outer].into_iter().flatten() {
            if !p.is_file() {
                return Err(CliError::Validation(format!("input {} does not exist", p.display())));
            }
        }
        for out in [self.output.clone(), self.summary_path()] {
            let dir = match out.parent() {
                Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
                _ => PathBuf::from("."),
            };
            std::fs::create_dir_all(&dir).map_err(|e| CliError::Validation(format!("output directory {}: {e}", dir.display())))?;
            let meta = std::fs::metadata(&dir).map_err(|e| CliError::Validation(format!("{}: {e}", dir.display())))?;
            if meta.permissions().readonly() {
                return Err(CliError::Validation(format!("output directory {} is read-only", dir.display())));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    /// Points per axis, endpoints included.
    pub n: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomBox {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub count: usize,
}

/// Probe points: explicit, a tensor grid, or uniform samples drawn from
/// the manifest seed. Kinds given together are concatenated in that order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Probes {
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    pub grid: Option<Grid>,
    pub random: Option<RandomBox>,
}

impl Probes {
    pub fn points(&self, dim: usize, seed: u64) -> Result<Vec<Vec<f64>>, CliError> {
        let bad = |m: String| Err(CliError::Validation(m));
        let mut out = Vec::new();
        for p in &self.points {
            if p.len() != dim {
                return bad(format!("probe {p:?} is not {dim}-dimensional"));
            }
            out.push(p.clone());
        }
        if let Some(g) = &self.grid {
            if g.lo.len() != dim || g.hi.len() != dim || g.n.len() != dim || g.n.iter().any(|n| *n == 0) {
                return bad(format!("grid must give lo, hi and positive n for {dim} axes"));
            }
            let total: usize = g.n.iter().product();
            for mut i in 0..total {
                let mut p = vec![0.0; dim];
                for k in (0..dim).rev() {
                    let j = i % g.n[k];
                    i /= g.n[k];
                    p[k] = if g.n[k] == 1 { g.lo[k] } else { g.lo[k] + (g.hi[k] - g.lo[k]) * j as f64 / (g.n[k] - 1) as f64 };
                }
                out.push(p);
            }
        }
        if let Some(r) = &self.random {
            if r.lo.len() != dim || r.hi.len() != dim || r.lo.iter().zip(&r.hi).any(|(a, b)| !(a < b)) {
                return bad(format!("random box must give lo < hi for {dim} axes"));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..r.count {
                out.push(r.lo.iter().zip(&r.hi).map(|(a, b)| rng.random_range(*a..*b)).collect());
            }
        }
        if out.is_empty() {
            return bad("no probe points".into());
        }
        Ok(out)
    }
}
