//! Structured run configuration (TOML): a model block, a list of risk
//! queries, the numerics block and the output block. Unknown keys are
//! rejected and every component is re-validated through its constructor
//! after deserialization.

use crate::error::{Error, Result};
use crate::laplace::{InversionConfig, InversionMethod};
use crate::mc::SimConfig;
use crate::process::{Family, ProcessSpec};
use crate::risk::{Horizon, Numerics, PriceModel, RiskQuery};
use crate::special::SeriesTolerance;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub queries: Vec<QueryConfig>,
    #[serde(default)]
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.model.to_model()?;
        cfg.numerics.to_numerics()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }
}

fn default_s0() -> f64 {
    1.0
}

/// Model block; field names are exactly the family parameter names.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub family: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    #[serde(default = "default_s0")]
    pub s0: f64,
}

impl ModelConfig {
    pub fn to_spec(&self) -> Result<ProcessSpec> {
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| Error::Config(format!("family '{}' needs '{}'", self.family, name)))
        };
        match self.family.as_str() {
            "bm" | "brownian" => {
                ProcessSpec::brownian(need(self.mu, "mu")?, need(self.sigma2, "sigma2")?)
            }
            "stable" => ProcessSpec::stable(need(self.alpha, "alpha")?, need(self.sigma, "sigma")?),
            "stable-drift" => ProcessSpec::stable_drift(
                need(self.mu, "mu")?,
                need(self.sigma, "sigma")?,
                need(self.alpha, "alpha")?,
            ),
            "jde" | "jump-diffusion" => ProcessSpec::jump_diffusion(
                need(self.mu, "mu")?,
                need(self.sigma2, "sigma2")?,
                need(self.lambda, "lambda")?,
                need(self.eta, "eta")?,
            ),
            other => Err(Error::Config(format!(
                "unknown family '{other}' (expected bm, stable, stable-drift or jde)"
            ))),
        }
    }

    pub fn to_model(&self) -> Result<PriceModel> {
        PriceModel::new(self.to_spec()?, self.s0)
    }

    pub fn from_spec(spec: &ProcessSpec, s0: f64) -> ModelConfig {
        let mut cfg = ModelConfig {
            family: String::new(),
            mu: None,
            sigma2: None,
            sigma: None,
            alpha: None,
            lambda: None,
            eta: None,
            s0,
        };
        match *spec.family() {
            Family::BrownianDrift { mu, sigma2 } => {
                cfg.family = "bm".into();
                cfg.mu = Some(mu);
                cfg.sigma2 = Some(sigma2);
            }
            Family::StableNeg { alpha, sigma } => {
                cfg.family = "stable".into();
                cfg.alpha = Some(alpha);
                cfg.sigma = Some(sigma);
            }
            Family::StableDrift { mu, sigma, alpha } => {
                cfg.family = "stable-drift".into();
                cfg.mu = Some(mu);
                cfg.sigma = Some(sigma);
                cfg.alpha = Some(alpha);
            }
            Family::JumpDiffusionExp { mu, sigma2, lambda, eta } => {
                cfg.family = "jde".into();
                cfg.mu = Some(mu);
                cfg.sigma2 = Some(sigma2);
                cfg.lambda = Some(lambda);
                cfg.eta = Some(eta);
            }
        }
        cfg
    }
}

/// Horizon: the string "inf" or a positive number.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HorizonConfig {
    Finite(f64),
    Named(InfKeyword),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub enum InfKeyword {
    #[serde(rename = "inf")]
    Inf,
}

impl Default for HorizonConfig {
    fn default() -> Self {
        HorizonConfig::Named(InfKeyword::Inf)
    }
}

impl HorizonConfig {
    pub fn to_horizon(self) -> Horizon {
        match self {
            HorizonConfig::Finite(t) => Horizon::Finite(t),
            HorizonConfig::Named(_) => Horizon::Infinite,
        }
    }

    pub fn parse(text: &str) -> Result<HorizonConfig> {
        if text == "inf" || text == "infinite" {
            return Ok(HorizonConfig::Named(InfKeyword::Inf));
        }
        text.parse::<f64>()
            .map(HorizonConfig::Finite)
            .map_err(|_| Error::Config(format!("horizon must be 'inf' or a number, got '{text}'")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "kind", rename_all = "kebab-case")]
pub enum QueryConfig {
    DdBeforeRally {
        alpha: f64,
        beta: f64,
        #[serde(default)]
        horizon: HorizonConfig,
    },
    NewMin {
        alpha: f64,
        #[serde(default)]
        horizon: HorizonConfig,
    },
    NewMax {
        beta: f64,
        #[serde(default)]
        horizon: HorizonConfig,
    },
    ExpectedDd { alpha: f64, horizon: f64 },
    CarrWuSym { alpha: f64 },
    CarrWuCrash { alpha: f64, beta: f64 },
}

impl QueryConfig {
    pub fn risk_query(&self) -> Result<RiskQuery> {
        match *self {
            QueryConfig::DdBeforeRally { alpha, beta, horizon } => {
                RiskQuery::new(alpha, beta, horizon.to_horizon())
            }
            QueryConfig::NewMin { alpha, horizon } => {
                RiskQuery::drawdown_only(alpha, horizon.to_horizon())
            }
            QueryConfig::NewMax { beta, horizon } => RiskQuery::new(0.5, beta, horizon.to_horizon()),
            QueryConfig::ExpectedDd { alpha, horizon } => {
                RiskQuery::drawdown_only(alpha, Horizon::Finite(horizon))
            }
            QueryConfig::CarrWuSym { alpha } => {
                RiskQuery::new(alpha, alpha / (1.0 - alpha), Horizon::Infinite)
            }
            QueryConfig::CarrWuCrash { alpha, beta } => {
                RiskQuery::new(alpha, beta, Horizon::Infinite)
            }
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inversion: Option<InversionBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub series: Option<SeriesBlock>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim: Option<SimBlock>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InversionBlock {
    #[serde(default = "default_method")]
    pub method: String,
    pub terms: usize,
    pub precision_decimals: u32,
}

fn default_method() -> String {
    "euler".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SeriesBlock {
    pub abs_tol: f64,
    pub max_terms: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimBlock {
    pub dt: f64,
    pub n_paths: usize,
    pub seed: u64,
    pub t_max: f64,
}

impl NumericsConfig {
    pub fn to_numerics(&self) -> Result<Numerics> {
        let mut numerics = Numerics::default();
        if let Some(inv) = &self.inversion {
            let method = match inv.method.as_str() {
                "euler" => InversionMethod::EulerSummation,
                "talbot" => InversionMethod::FixedTalbot,
                other => {
                    return Err(Error::Config(format!(
                        "unknown inversion method '{other}' (expected euler or talbot)"
                    )))
                }
            };
            numerics.inversion = InversionConfig::new(method, inv.terms, inv.precision_decimals)?;
        }
        if let Some(series) = &self.series {
            numerics.series = SeriesTolerance::new(series.abs_tol, series.max_terms)?;
        }
        if let Some(sim) = &self.sim {
            numerics.sim = SimConfig::new(sim.dt, sim.n_paths, sim.seed, sim.t_max)?;
        }
        Ok(numerics)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub format: OutputFormat,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}
