//! Run configuration: a JSON document mirroring the command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use progeny_ldp::montecarlo::LdpScenario;
use progeny_ldp::offspring::{DistSpec, Pmf};
use progeny_ldp::progeny::ProgenyModel;
use progeny_ldp::ratefn::{RateKind, Route};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rate,
    ProgenyPmf,
    Extinction,
    Compare,
    Simulate,
    Verify,
}

/// Offspring law `f` and initial-population law `g` (one ancestor if absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub f: DistSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<DistSpec>,
}

impl ModelSpec {
    pub fn build(&self) -> Result<ProgenyModel, CliError> {
        let f = self.f.build().map_err(|e| CliError::Config(format!("model.f: {e}")))?;
        let g = match &self.g {
            Some(spec) => spec.build().map_err(|e| CliError::Config(format!("model.g: {e}")))?,
            None => Pmf::explicit(&[(1, 1.0)])?,
        };
        Ok(ProgenyModel::new(f, g)?)
    }
}

/// Evaluation grid `lo:hi:points`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn validate(&self) -> Result<(), CliError> {
        if self.lo.partial_cmp(&self.hi) != Some(std::cmp::Ordering::Less) || self.points < 2 {
            return Err(CliError::Config(format!("grid: need lo < hi and points >= 2 (got {self})")));
        }
        Ok(())
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points).map(|i| if i + 1 == self.points { self.hi } else { self.lo + step * i as f64 }).collect()
    }
}

impl fmt::Display for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.lo, self.hi, self.points)
    }
}

impl FromStr for Grid {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(format!("expected lo:hi:points, got {s:?}"));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}"));
        let points = parts[2].trim().parse::<usize>().map_err(|e| format!("{:?}: {e}", parts[2]))?;
        Ok(Grid { lo: num(parts[0])?, hi: num(parts[1])?, points })
    }
}

/// Which rate function `rate` tabulates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateSelection {
    pub kind: RateKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub route: Option<Route>,
}

/// Pass thresholds of the `verify` checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub prop1: f64,
    pub prop2: f64,
    pub prop3_contraction: f64,
    pub prop4_bracket: f64,
    pub corollary1: f64,
    pub remark6: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            prop1: 1e-6,
            prop2: 1e-5,
            prop3_contraction: 1e-6,
            prop4_bracket: 1e-9,
            corollary1: 1e-10,
            remark6: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate: Option<RateSelection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checks: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<LdpScenario>,
    /// Also run the random- versus deterministic-start tail comparison
    /// at this deviation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_ratio_eps: Option<f64>,
}

impl RunConfig {
    pub fn empty(command: Command) -> Self {
        Self {
            command,
            model: None,
            grid: None,
            output_dir: None,
            seed: None,
            tolerances: Tolerances::default(),
            rate: None,
            k_max: None,
            checks: None,
            scenario: None,
            tail_ratio_eps: None,
        }
    }

    /// Reads a run configuration, or a bare scenario for `simulate`.
    pub fn load(path: &Path, command: Command) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| json_error(path, &e))?;
        let is_run_config = value.get("command").is_some();
        if !is_run_config && command == Command::Simulate {
            let scenario: LdpScenario = serde_json::from_str(&text).map_err(|e| json_error(path, &e))?;
            let mut config = Self::empty(command);
            config.scenario = Some(scenario);
            return Ok(config);
        }
        serde_json::from_str(&text).map_err(|e| json_error(path, &e))
    }

    pub fn model(&self) -> Result<ProgenyModel, CliError> {
        self.model.as_ref().ok_or_else(|| CliError::Config("model: missing (use --config or --f/--g)".into()))?.build()
    }

    pub fn grid(&self) -> Result<Grid, CliError> {
        let grid = self.grid.ok_or_else(|| CliError::Config("grid: missing (use --grid lo:hi:points)".into()))?;
        grid.validate()?;
        Ok(grid)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}

fn json_error(path: &Path, e: &serde_json::Error) -> CliError {
    CliError::Config(format!("{}: line {} column {}: {e}", path.display(), e.line(), e.column()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        let g: Grid = "0:1:5".parse().unwrap();
        assert_eq!(g, Grid { lo: 0.0, hi: 1.0, points: 5 });
        assert_eq!(g.values(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert!("0:1".parse::<Grid>().is_err());
        assert!("1:0:5".parse::<Grid>().unwrap().validate().is_err());
        assert!("0:1:1".parse::<Grid>().unwrap().validate().is_err());
    }

    #[test]
    fn config_round_trip() {
        let mut c = RunConfig::empty(Command::Rate);
        c.model = Some(ModelSpec { f: DistSpec::bernoulli(0.5), g: None });
        c.grid = Some(Grid { lo: 1.0, hi: 3.0, points: 5 });
        c.rate = Some(RateSelection { kind: RateKind::Progeny, route: Some(Route::Direct) });
        let back: RunConfig = serde_json::from_str(&c.to_json()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.to_json(), c.to_json());
    }
}
