//! Scenario configuration: strict JSON parsing and validation.

use std::path::Path;

use pbe_core::equilibrium::{SweepAxis, SweepGrid};
use pbe_core::{
    GameParams, Mm1Cost, Mm1CostParams, ParamError, SolverTolerances, TrafficEnvironment,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("{field} = {value} is invalid: expected {expected}")]
    Invalid {
        field: String,
        value: String,
        expected: String,
    },
}

impl ConfigError {
    fn invalid(
        field: impl Into<String>,
        value: impl ToString,
        expected: impl Into<String>,
    ) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            value: value.to_string(),
            expected: expected.into(),
        }
    }

    fn from_param(section: &str, e: ParamError) -> Self {
        Self::invalid(format!("{section}.{}", e.field), e.value, e.expected)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema_version: u32,
    pub traffic: TrafficConfig,
    pub cost_model: CostModelConfig,
    pub game: GameConfig,
    #[serde(default)]
    pub solver: Option<SolverConfig>,
    #[serde(default)]
    pub verify: Option<VerifyConfig>,
    #[serde(default)]
    pub sweep: Option<SweepConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    pub theta: f64,
    /// veh/hr
    pub lambda_total: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum CostModelConfig {
    Mm1(Mm1Config),
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct Mm1Config {
    /// veh/hr
    pub mu_h: f64,
    /// veh/hr
    pub mu_l: f64,
    /// USD/hr
    pub vot: f64,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct GameConfig {
    pub p_t_l: f64,
    pub p_d: f64,
    pub f_l: f64,
    #[serde(default)]
    pub p_t_h: f64,
    #[serde(default)]
    pub f_h: f64,
    #[serde(default = "one")]
    pub detect_prob: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    pub boundary_rel_tol: Option<f64>,
    pub utility_tol: Option<f64>,
    pub bisection_tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Check {
    Grid,
    Dynamics,
    Draws,
    Queue,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub checks: Option<Vec<Check>>,
    pub sigma_steps: Option<usize>,
    pub seed: Option<u64>,
    pub draws: Option<usize>,
    pub damping: Option<f64>,
    pub max_iter: Option<usize>,
    pub dynamics_tol: Option<f64>,
    pub queue: Option<QueueConfig>,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct QueueConfig {
    /// veh/hr
    pub arrival_rate: f64,
    /// veh/hr
    pub service_rate: f64,
    /// departures
    pub horizon: u64,
    #[serde(default = "default_queue_rel_tol")]
    pub rel_tol: f64,
}

fn default_queue_rel_tol() -> f64 {
    0.02
}

impl Default for QueueConfig {
    fn default() -> Self {
        Self {
            arrival_rate: 720.0,
            service_rate: 1700.0,
            horizon: 1_000_000,
            rel_tol: default_queue_rel_tol(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub axes: Vec<AxisConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, Serialize)]
pub enum SweepVariable {
    #[serde(rename = "p_t_l")]
    PTL,
    #[serde(rename = "p_d")]
    PD,
    #[serde(rename = "theta")]
    Theta,
    #[serde(rename = "f_l")]
    FL,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::PTL => "p_t_l",
            SweepVariable::PD => "p_d",
            SweepVariable::Theta => "theta",
            SweepVariable::FL => "f_l",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scale {
    #[default]
    Linear,
    Log,
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct AxisConfig {
    pub variable: SweepVariable,
    pub min: f64,
    pub max: f64,
    pub steps: usize,
    #[serde(default)]
    pub scale: Scale,
}

/// Validated verification settings with defaults filled in.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifySettings {
    pub checks: Vec<Check>,
    pub sigma_steps: usize,
    pub seed: u64,
    pub draws: usize,
    pub damping: f64,
    pub max_iter: usize,
    pub dynamics_tol: f64,
    pub queue: QueueSettings,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueueSettings {
    pub arrival_rate: f64,
    pub service_rate: f64,
    pub horizon: u64,
    pub rel_tol: f64,
}

pub const DEFAULT_SEED: u64 = 2024;

/// A validated scenario.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub env: TrafficEnvironment,
    pub model: Mm1Cost,
    pub params: GameParams,
    pub tolerances: SolverTolerances,
    pub verify: VerifySettings,
    /// Sweep axes keyed by variable, in the order given.
    pub axes: Vec<(SweepVariable, SweepAxis)>,
    /// Hex SHA-256 of the raw config bytes.
    pub config_sha256: String,
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let bytes = std::fs::read(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_bytes(&bytes)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, ConfigError> {
        let raw: RawConfig = serde_json::from_slice(bytes)?;
        let mut s = Self::from_raw(&raw)?;
        s.config_sha256 = hex::encode(Sha256::digest(bytes));
        Ok(s)
    }

    pub fn from_raw(raw: &RawConfig) -> Result<Self, ConfigError> {
        if raw.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::invalid(
                "schema_version",
                raw.schema_version,
                "1",
            ));
        }
        let env = TrafficEnvironment::new(raw.traffic.theta, raw.traffic.lambda_total)
            .map_err(|e| ConfigError::from_param("traffic", e))?;
        let model = match &raw.cost_model {
            CostModelConfig::Mm1(c) => Mm1Cost::new(
                Mm1CostParams::new(c.mu_h, c.mu_l, c.vot)
                    .map_err(|e| ConfigError::from_param("cost_model.mm1", e))?,
            ),
        };
        let g = &raw.game;
        let params = GameParams::new(g.p_t_h, g.p_t_l, g.p_d, g.f_h, g.f_l, g.detect_prob)
            .map_err(|e| ConfigError::from_param("game", e))?;

        let mut tolerances = SolverTolerances::default();
        if let Some(s) = &raw.solver {
            for (name, value, slot) in [
                (
                    "boundary_rel_tol",
                    s.boundary_rel_tol,
                    &mut tolerances.boundary_rel_tol,
                ),
                ("utility_tol", s.utility_tol, &mut tolerances.utility_tol),
                (
                    "bisection_tol",
                    s.bisection_tol,
                    &mut tolerances.bisection_tol,
                ),
            ] {
                if let Some(v) = value {
                    if !(v > 0.0 && v.is_finite()) {
                        return Err(ConfigError::invalid(
                            format!("solver.{name}"),
                            v,
                            "a finite value > 0",
                        ));
                    }
                    *slot = v;
                }
            }
        }

        let verify = verify_settings(raw.verify.clone().unwrap_or_default())?;
        let axes = match &raw.sweep {
            None => Vec::new(),
            Some(s) => sweep_axes(s)?,
        };
        Ok(Self {
            env,
            model,
            params,
            tolerances,
            verify,
            axes,
            config_sha256: String::new(),
        })
    }

    pub fn axis(&self, var: SweepVariable) -> Option<&SweepAxis> {
        self.axes.iter().find(|(v, _)| *v == var).map(|(_, a)| a)
    }

    /// Sweep grid; variables without an axis stay at their base value.
    pub fn sweep_grid(&self) -> SweepGrid {
        let values = |v: SweepVariable| self.axis(v).map(|a| a.values());
        SweepGrid {
            p_t_l: values(SweepVariable::PTL).unwrap_or_else(|| vec![self.params.p_t_l()]),
            p_d: values(SweepVariable::PD).unwrap_or_else(|| vec![self.params.p_d()]),
            theta: values(SweepVariable::Theta).unwrap_or_default(),
            f_l: values(SweepVariable::FL).unwrap_or_default(),
        }
    }

    pub fn with_seed(mut self, seed: Option<u64>) -> Self {
        if let Some(seed) = seed {
            self.verify.seed = seed;
        }
        self
    }
}

fn verify_settings(v: VerifyConfig) -> Result<VerifySettings, ConfigError> {
    let s = VerifySettings {
        checks: v
            .checks
            .unwrap_or_else(|| vec![Check::Grid, Check::Dynamics, Check::Draws, Check::Queue]),
        sigma_steps: v.sigma_steps.unwrap_or(2000),
        seed: v.seed.unwrap_or(DEFAULT_SEED),
        draws: v.draws.unwrap_or(20),
        damping: v.damping.unwrap_or(0.2),
        max_iter: v.max_iter.unwrap_or(200_000),
        dynamics_tol: v.dynamics_tol.unwrap_or(1e-15),
        queue: {
            let q = v.queue.unwrap_or_default();
            QueueSettings {
                arrival_rate: q.arrival_rate,
                service_rate: q.service_rate,
                horizon: q.horizon,
                rel_tol: q.rel_tol,
            }
        },
    };
    if s.sigma_steps < 100 {
        return Err(ConfigError::invalid(
            "verify.sigma_steps",
            s.sigma_steps,
            "at least 100",
        ));
    }
    if !(s.damping > 0.0 && s.damping <= 1.0) {
        return Err(ConfigError::invalid(
            "verify.damping",
            s.damping,
            "in (0, 1]",
        ));
    }
    if !(s.dynamics_tol > 0.0 && s.dynamics_tol.is_finite()) {
        return Err(ConfigError::invalid(
            "verify.dynamics_tol",
            s.dynamics_tol,
            "a finite value > 0",
        ));
    }
    let q = &s.queue;
    for (name, value) in [
        ("arrival_rate", q.arrival_rate),
        ("service_rate", q.service_rate),
    ] {
        if !(value > 0.0 && value.is_finite()) {
            return Err(ConfigError::invalid(
                format!("verify.queue.{name}"),
                value,
                "a finite rate > 0",
            ));
        }
    }
    if q.horizon < 10_000 {
        return Err(ConfigError::invalid(
            "verify.queue.horizon",
            q.horizon,
            "at least 10000 departures",
        ));
    }
    if !(q.rel_tol > 0.0 && q.rel_tol.is_finite()) {
        return Err(ConfigError::invalid(
            "verify.queue.rel_tol",
            q.rel_tol,
            "a finite value > 0",
        ));
    }
    Ok(s)
}

fn sweep_axes(s: &SweepConfig) -> Result<Vec<(SweepVariable, SweepAxis)>, ConfigError> {
    let mut out: Vec<(SweepVariable, SweepAxis)> = Vec::new();
    for (i, a) in s.axes.iter().enumerate() {
        let field = |f: &str| format!("sweep.axes[{i}].{f}");
        if out.iter().any(|(v, _)| *v == a.variable) {
            return Err(ConfigError::invalid(
                field("variable"),
                a.variable.name(),
                "each variable at most once",
            ));
        }
        if !(a.min.is_finite() && a.max.is_finite() && a.min <= a.max) {
            return Err(ConfigError::invalid(
                field("max"),
                a.max,
                format!("finite and ≥ min = {}", a.min),
            ));
        }
        if a.steps == 0 {
            return Err(ConfigError::invalid(field("steps"), a.steps, "at least 1"));
        }
        if a.scale == Scale::Log && a.min <= 0.0 {
            return Err(ConfigError::invalid(
                field("min"),
                a.min,
                "> 0 on a log axis",
            ));
        }
        let axis = match a.scale {
            Scale::Linear => SweepAxis::linear(a.min, a.max, a.steps),
            Scale::Log => SweepAxis::log(a.min, a.max, a.steps),
        };
        out.push((a.variable, axis));
    }
    Ok(out)
}
