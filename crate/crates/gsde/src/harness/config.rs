//! JSON experiment configuration.
//!
//! One document drives every subcommand. Parsing fails closed: unknown
//! keys anywhere are errors, and each subcommand rejects configs carrying
//! keys it cannot honor (a `q_list` for a single-resolution experiment,
//! say) instead of silently ignoring them.
//!
//! ```json
//! {
//!   "problem": {"name": "gbm-like", "c": 0.2, "z0": 1.0, "t0": 0.0, "T": 1.0},
//!   "band": {"lo": 0.5, "hi": 1.0},
//!   "scenarios": ["constant-lo", "constant-hi", "constant-mid",
//!                 "per-step-uniform", "per-step-bang-bang"],
//!   "q_list": [4, 8, 16, 32, 64],
//!   "q_ref": 1024,
//!   "n_paths": 10000,
//!   "seed": 42,
//!   "out": {"csv": "converge.csv", "json": "converge.json"}
//! }
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::gshock::{ScenarioPolicy, VolatilityBand};
use crate::harness::experiments::RunSpec;
use crate::problem::{builtin, declared, BuiltinParams, Moduli, SdeProblem, BUILTIN_NAMES};

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: ProblemConfig,
    pub band: BandConfig,
    #[serde(default)]
    pub scenarios: Option<Vec<ScenarioPolicy>>,
    #[serde(default)]
    pub q: Option<u32>,
    #[serde(default)]
    pub q_list: Option<Vec<u32>>,
    #[serde(default)]
    pub q_ref: Option<u32>,
    #[serde(default)]
    pub n_paths: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<OutConfig>,
}

/// Problem selector: a builtin name plus its scalar parameters, or
/// `declared` with explicit modulus constants and zero dynamics.
#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    #[serde(default)]
    pub a: Option<f64>,
    #[serde(default)]
    pub b: Option<f64>,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub z0: Option<f64>,
    #[serde(default)]
    pub t0: Option<f64>,
    #[serde(default, rename = "T")]
    pub t_end: Option<f64>,
    #[serde(default)]
    pub z0_second_moment: Option<f64>,
    #[serde(default, rename = "C")]
    pub lip_const: Option<f64>,
    #[serde(default, rename = "D")]
    pub lip_slope: Option<f64>,
    #[serde(default, rename = "M")]
    pub growth_bound: Option<f64>,
}

#[derive(Debug, Clone, Copy, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    /// Reads and parses a config file. Read failures are configuration
    /// errors: the file named on the command line could not be used.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        ExperimentConfig::from_json_str(&text)
    }

    /// Structural checks shared by every subcommand; problem construction
    /// doubles as parameter validation.
    fn check(&self) -> Result<()> {
        self.problem()?;
        if let Some(scenarios) = &self.scenarios {
            if scenarios.is_empty() {
                return Err(Error::Config("scenario list is empty".into()));
            }
            let mut seen = HashSet::new();
            for s in scenarios {
                if !seen.insert(s.id()) {
                    return Err(Error::Config(format!(
                        "scenario `{}` appears more than once",
                        s.name()
                    )));
                }
            }
        }
        if self.q.is_some() && self.q_list.is_some() {
            return Err(Error::Config("give either q or q_list, not both".into()));
        }
        if let Some(q) = self.q {
            if q == 0 {
                return Err(Error::Config("q must be positive".into()));
            }
        }
        if let Some(list) = &self.q_list {
            if list.is_empty() {
                return Err(Error::Config("q_list is empty".into()));
            }
            if list[0] == 0 {
                return Err(Error::Config("q_list entries must be positive".into()));
            }
            if list.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::Config("q_list must be strictly increasing".into()));
            }
        }
        if self.q_ref == Some(0) {
            return Err(Error::Config("q_ref must be positive".into()));
        }
        if let Some(n) = self.n_paths {
            if n < 2 {
                return Err(Error::Config(format!("n_paths must be at least 2, got {n}")));
            }
        }
        Ok(())
    }

    pub fn band(&self) -> Result<VolatilityBand> {
        VolatilityBand::new(self.band.lo, self.band.hi)
    }

    pub fn problem(&self) -> Result<SdeProblem> {
        self.problem.build(self.band()?)
    }

    /// Scenarios, path count, and seed assembled for the Monte Carlo
    /// experiments; errors if any of the three is missing.
    pub fn run_spec(&self) -> Result<RunSpec> {
        let scenarios = self
            .scenarios
            .clone()
            .ok_or_else(|| Error::Config("this command needs `scenarios`".into()))?;
        let n_paths = self
            .n_paths
            .ok_or_else(|| Error::Config("this command needs `n_paths`".into()))?;
        let seed = self
            .seed
            .ok_or_else(|| Error::Config("this command needs `seed`".into()))?;
        Ok(RunSpec {
            problem: self.problem()?,
            scenarios,
            n_paths,
            seed,
        })
    }

    /// The single resolution for moments/increments/paths runs.
    pub fn single_resolution(&self) -> Result<u32> {
        if self.q_list.is_some() {
            return Err(Error::Config(
                "this command takes a single `q`, not `q_list`".into(),
            ));
        }
        self.q
            .ok_or_else(|| Error::Config("this command needs `q`".into()))
    }

    /// The resolution ladder and reference resolution for convergence runs.
    pub fn ladder(&self) -> Result<(Vec<u32>, u32)> {
        if self.q.is_some() {
            return Err(Error::Config(
                "the convergence command takes `q_list`, not `q`".into(),
            ));
        }
        let list = self
            .q_list
            .clone()
            .ok_or_else(|| Error::Config("the convergence command needs `q_list`".into()))?;
        let q_ref = self
            .q_ref
            .ok_or_else(|| Error::Config("the convergence command needs `q_ref`".into()))?;
        Ok((list, q_ref))
    }

    /// Resolutions for the bound table; empty when none were given.
    pub fn table_resolutions(&self) -> Vec<u32> {
        match (&self.q, &self.q_list) {
            (Some(q), _) => vec![*q],
            (None, Some(list)) => list.clone(),
            (None, None) => Vec::new(),
        }
    }
}

impl ProblemConfig {
    fn params_in_use(&self) -> Vec<(&'static str, bool)> {
        vec![
            ("a", self.a.is_some()),
            ("b", self.b.is_some()),
            ("c", self.c.is_some()),
            ("z0", self.z0.is_some()),
            ("t0", self.t0.is_some()),
            ("T", self.t_end.is_some()),
            ("z0_second_moment", self.z0_second_moment.is_some()),
            ("C", self.lip_const.is_some()),
            ("D", self.lip_slope.is_some()),
            ("M", self.growth_bound.is_some()),
        ]
    }

    pub fn build(&self, band: VolatilityBand) -> Result<SdeProblem> {
        let allowed: &[&str] = match self.name.as_str() {
            "zero" | "quadratic" => &["z0", "t0", "T"],
            "pure-drift" => &["a", "z0", "t0", "T"],
            "linear-lipschitz" => &["a", "b", "c", "z0", "t0", "T"],
            "gbm-like" => &["c", "z0", "t0", "T"],
            "declared" => &["z0", "t0", "T", "z0_second_moment", "C", "D", "M"],
            other => {
                return Err(Error::Config(format!(
                    "unknown problem `{other}`; expected one of {}, declared",
                    BUILTIN_NAMES.join(", ")
                )))
            }
        };
        for (key, set) in self.params_in_use() {
            if set && !allowed.contains(&key) {
                return Err(Error::Config(format!(
                    "parameter `{key}` is not used by problem `{}`",
                    self.name
                )));
            }
        }

        let defaults = BuiltinParams::default();
        let t0 = self.t0.unwrap_or(defaults.t0);
        let t_end = self.t_end.unwrap_or(defaults.t_end);
        let z0 = self.z0.unwrap_or(defaults.initial_value);
        if self.name == "declared" {
            return declared(
                z0,
                self.z0_second_moment,
                t0,
                t_end,
                Moduli {
                    lip_const: self.lip_const.unwrap_or(0.0),
                    lip_slope: self.lip_slope.unwrap_or(0.0),
                    growth_bound: self.growth_bound.unwrap_or(0.0),
                },
                band,
            );
        }
        builtin(
            &self.name,
            &BuiltinParams {
                a: self.a.unwrap_or(defaults.a),
                b: self.b.unwrap_or(defaults.b),
                c: self.c.unwrap_or(defaults.c),
                initial_value: z0,
                t0,
                t_end,
                band,
            },
        )
    }
}
