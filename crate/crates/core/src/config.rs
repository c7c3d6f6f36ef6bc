//! Experiment configuration, read from TOML or JSON.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bigcount::{Budget, DEFAULT_DIGIT_BUDGET};
use crate::domain::{ConvexBall, MapSpec, NonexpansiveMap};
use crate::error::{Error, Result};
use crate::gfunction::GFunction;
use crate::model_space::{Curvature, ModelPoint};
use crate::rng::trial_rng;
use crate::schedule::{DivergenceRate, EpsModulus, Lambda, ModuliSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpaceConfig {
    pub kappa: f64,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_dim() -> usize {
    2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    /// Defaults to the pole (0, …, 0, 1).
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    pub radius: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleConfig {
    #[default]
    Harmonic,
    InverseSqrt,
    Custom { lambda: Lambda, alpha: EpsModulus, gamma: EpsModulus, theta: DivergenceRate },
}

impl ScheduleConfig {
    pub fn resolve(&self) -> Result<ModuliSchedule> {
        match self {
            ScheduleConfig::Harmonic => Ok(ModuliSchedule::harmonic()),
            ScheduleConfig::InverseSqrt => Ok(ModuliSchedule::inverse_sqrt()),
            ScheduleConfig::Custom { lambda, alpha, gamma, theta } => {
                ModuliSchedule::custom(lambda.clone(), alpha.clone(), gamma.clone(), theta.clone())
            }
        }
    }

    pub fn is_harmonic(&self) -> bool {
        matches!(self, ScheduleConfig::Harmonic)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonConfig {
    /// Halpern steps N.
    #[serde(default = "default_iterations")]
    pub iterations: u64,
    /// Largest resolvent index i in the Browder family.
    #[serde(default = "default_family")]
    pub family: u64,
    /// Picard stopping tolerance relative to M.
    #[serde(default = "default_rel_tol")]
    pub browder_rel_tol: f64,
}

fn default_iterations() -> u64 {
    100_000
}

fn default_family() -> u64 {
    64
}

fn default_rel_tol() -> f64 {
    1e-11
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig { iterations: default_iterations(), family: default_family(), browder_rel_tol: default_rel_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuzzConfig {
    /// Oracle names, or "all".
    #[serde(default = "default_oracles")]
    pub oracles: Vec<String>,
    #[serde(default = "default_trials")]
    pub trials: u64,
    #[serde(default = "default_kappas")]
    pub kappas: Vec<f64>,
    /// Values of M√κ.
    #[serde(default = "default_scaled_m")]
    pub scaled_m: Vec<f64>,
    #[serde(default = "default_dim")]
    pub dim: usize,
}

fn default_oracles() -> Vec<String> {
    vec!["all".into()]
}

fn default_trials() -> u64 {
    10_000
}

fn default_kappas() -> Vec<f64> {
    vec![0.5, 1.0, 4.0]
}

fn default_scaled_m() -> Vec<f64> {
    vec![0.2, 0.8, 1.4]
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig {
            oracles: default_oracles(),
            trials: default_trials(),
            kappas: default_kappas(),
            scaled_m: default_scaled_m(),
            dim: default_dim(),
        }
    }
}

/// Inputs of one evaluation of Θ and Δ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RecurrenceStub {
    pub eps: f64,
    pub l: f64,
    pub theta: DivergenceRate,
    pub psi: EpsModulus,
    pub g: GFunction,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    /// ε values for K(ε, g, M), each in (0,1).
    #[serde(default)]
    pub browder_eps: Vec<f64>,
    /// t values for the limsup rate.
    #[serde(default)]
    pub limsup_t: Vec<f64>,
    #[serde(default)]
    pub recurrence: Vec<RecurrenceStub>,
    /// Also evaluate Σ; off by default because towers can take seconds.
    #[serde(default)]
    pub tower: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub space: SpaceConfig,
    pub ball: BallConfig,
    #[serde(default)]
    pub map: Option<MapSpec>,
    /// Anchor u; a seeded sample from the ball when absent.
    #[serde(default)]
    pub start: Option<Vec<f64>>,
    #[serde(default)]
    pub schedule: ScheduleConfig,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default = "GFunction::identity")]
    pub g: GFunction,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub horizon: HorizonConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_digits")]
    pub digit_budget: u64,
    #[serde(default)]
    pub log_estimate: bool,
    #[serde(default)]
    pub fuzz: FuzzConfig,
    #[serde(default)]
    pub rates: RatesConfig,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

fn default_digits() -> u64 {
    DEFAULT_DIGIT_BUDGET
}

/// The geometric objects a configuration describes.
#[derive(Clone, Debug)]
pub struct Setup {
    pub curvature: Curvature,
    pub ball: ConvexBall,
    pub u: ModelPoint,
    pub schedule: ModuliSchedule,
    /// M = 2·radius.
    pub m: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str, json: bool) -> Result<Self> {
        if json {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
        } else {
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
        }
    }

    /// JSON when the extension is `.json`, TOML otherwise.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
        Self::parse(&text, json)
    }

    pub fn budget(&self) -> Budget {
        Budget { max_digits: self.digit_budget, force_estimate: self.log_estimate }
    }

    pub fn setup(&self) -> Result<Setup> {
        let cf = |e: Error| Error::Config(e.to_string());
        let c = Curvature::new(self.space.kappa, self.space.dim).map_err(cf)?;
        let center = match &self.ball.center {
            Some(v) => ModelPoint::normalized(v.clone()).map_err(cf)?,
            None => ModelPoint::pole(self.space.dim),
        };
        let ball = ConvexBall::new(center, self.ball.radius, c).map_err(cf)?;
        let u = match &self.start {
            Some(v) => ModelPoint::normalized(v.clone()).map_err(cf)?,
            None => ball.sample(&mut trial_rng(self.seed, u64::MAX)),
        };
        if !ball.contains(&u) {
            return Err(Error::Config("start point lies outside the ball".into()));
        }
        let schedule = self.schedule.resolve().map_err(cf)?;
        let m = ball.diameter_bound();
        Ok(Setup { curvature: c, ball, u, schedule, m })
    }

    pub fn build_map(&self, ball: &ConvexBall) -> Result<NonexpansiveMap> {
        let spec = self.map.as_ref().ok_or_else(|| Error::Config("this experiment needs a [map] section".into()))?;
        NonexpansiveMap::from_spec(spec, ball).map_err(|e| Error::Config(e.to_string()))
    }

    /// Rejects ε outside (0, hi).
    pub fn check_eps(&self, grid: &[f64], hi: f64) -> Result<()> {
        if grid.is_empty() {
            return Err(Error::Config("the ε grid is empty".into()));
        }
        match grid.iter().find(|e| !(**e > 0.0 && **e < hi)) {
            Some(e) => Err(Error::Config(format!("ε = {e} outside (0, {hi})"))),
            None => Ok(()),
        }
    }
}
