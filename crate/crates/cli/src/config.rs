//! Experiment configuration read from TOML.

use std::fmt;
use std::path::{Path, PathBuf};

use msinject::noise::{LocationKind, ModelKind, NoiseModel};
use msinject::protocol::{build_stage1_with, build_stage2, CircuitProgram, PatternChoice, SchemeVariant};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Zz,
    Standard,
    Zzz,
}

impl Scheme {
    pub fn variant(self) -> SchemeVariant {
        match self {
            Scheme::Zz => SchemeVariant::TwoQubitZz,
            Scheme::Standard => SchemeVariant::StandardZ,
            Scheme::Zzz => SchemeVariant::ThreeQubitZzz,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Model {
    A,
    B,
}

impl Model {
    pub fn kind(self) -> ModelKind {
        match self {
            Model::A => ModelKind::A,
            Model::B => ModelKind::B,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pattern {
    #[default]
    Default,
    Alternate,
}

impl Pattern {
    pub fn choice(self) -> PatternChoice {
        match self {
            Pattern::Default => PatternChoice::Default,
            Pattern::Alternate => PatternChoice::Alternate,
        }
    }
}

/// Noise bias: a positive real or `"inf"` for pure dephasing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "EtaRepr", into = "EtaRepr")]
pub struct Eta(pub f64);

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum EtaRepr {
    Num(f64),
    Text(String),
}

impl TryFrom<EtaRepr> for Eta {
    type Error = String;
    fn try_from(r: EtaRepr) -> Result<Self, String> {
        match r {
            EtaRepr::Num(x) if x > 0.0 && x.is_finite() => Ok(Eta(x)),
            EtaRepr::Num(x) => Err(format!("eta must be positive and finite or \"inf\", got {x}")),
            EtaRepr::Text(s) if s == "inf" => Ok(Eta(f64::INFINITY)),
            EtaRepr::Text(s) => Err(format!("eta must be a number or \"inf\", got {s:?}")),
        }
    }
}

impl From<Eta> for EtaRepr {
    fn from(e: Eta) -> Self {
        if e.0.is_infinite() {
            EtaRepr::Text("inf".into())
        } else {
            EtaRepr::Num(e.0)
        }
    }
}

impl fmt::Display for Eta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_infinite() {
            f.write_str("inf")
        } else {
            write!(f, "{:.8e}", self.0)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub model: Model,
    pub eta: Eta,
}

/// Sweep axis; exactly one of the two lists is given.
#[derive(Clone, Debug, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_cx: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scheme: Scheme,
    pub dx1: usize,
    pub dz1: usize,
    pub dx2: usize,
    pub dz2: usize,
    /// Stage-II rounds; defaults to `dz2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dm: Option<usize>,
    /// Rotation angle in radians; defaults to π/8.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    pub noise: NoiseConfig,
    pub sweep: SweepConfig,
    pub shots: u64,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default)]
    pub pattern: Pattern,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Stage-I syndrome rounds; zero skips stage-I detection. Defaults per scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stage1_rounds: Option<usize>,
    /// Layout dump checked by `verify` in place of the generated layout.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub layout_dump: Option<PathBuf>,
}

/// One sweep point: the base rate and the resulting CNOT error rate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Point {
    pub p: f64,
    pub p_cx: f64,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let c: Self = toml::from_str(text)?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.into(), source })?;
        Self::parse(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn dm(&self) -> usize {
        self.dm.unwrap_or(self.dz2)
    }

    pub fn theta(&self) -> f64 {
        self.theta.unwrap_or(std::f64::consts::FRAC_PI_8)
    }

    pub fn stage1_rounds(&self) -> usize {
        self.stage1_rounds.unwrap_or(self.scheme.variant().default_stage1_rounds())
    }

    pub fn noise_model(&self, p: f64) -> Result<NoiseModel, ConfigError> {
        NoiseModel::new(self.noise.model.kind(), p, self.noise.eta.0).map_err(|e| invalid(e.to_string()))
    }

    /// Sweep points in increasing `p`.
    pub fn points(&self) -> Result<Vec<Point>, ConfigError> {
        let (kind, eta) = (self.noise.model.kind(), self.noise.eta.0);
        let mut pts: Vec<Point> = match (&self.sweep.p, &self.sweep.p_cx) {
            (Some(ps), None) => ps
                .iter()
                .map(|&p| Ok(Point { p, p_cx: self.noise_model(p)?.total_error(LocationKind::Cx) }))
                .collect::<Result<_, ConfigError>>()?,
            (None, Some(cs)) => cs
                .iter()
                .map(|&c| {
                    if !(c.is_finite() && c >= 0.0) {
                        return Err(invalid(format!("sweep value {c} is not a rate")));
                    }
                    let p = NoiseModel::p_for_cx_total(kind, c, eta);
                    self.noise_model(p)?;
                    Ok(Point { p, p_cx: c })
                })
                .collect::<Result<_, ConfigError>>()?,
            _ => return Err(invalid("sweep needs exactly one of `p` or `p_cx`")),
        };
        if pts.is_empty() {
            return Err(invalid("sweep is empty"));
        }
        pts.sort_by(|a, b| a.p.total_cmp(&b.p));
        Ok(pts)
    }

    /// Assemble the full program; all protocol preconditions are checked here.
    pub fn program(&self) -> Result<CircuitProgram, ConfigError> {
        let s1 = build_stage1_with(
            self.scheme.variant(),
            self.dx1,
            self.dz1,
            self.theta(),
            self.stage1_rounds(),
            PatternChoice::Default,
        )
        .map_err(|e| invalid(e.to_string()))?;
        build_stage2(&s1, self.dx2, self.dz2, self.dm(), self.pattern.choice()).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.shots == 0 {
            return Err(invalid("shots must be positive"));
        }
        if self.workers == Some(0) {
            return Err(invalid("workers must be positive"));
        }
        self.points()?;
        self.program()?;
        Ok(())
    }
}
