//! Run configuration: a flat JSON object with defaults, validated key by key.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};

use crate::accel::AccelConfig;
use crate::diagnostics::TheoryChecks;
use crate::error::{Error, Result};
use crate::lags::LagSet;
use crate::phase::Projection;
use crate::solver::{Algorithm, SolverConfig, DEFAULT_EPSILON, DEFAULT_MAX_ITER};
use crate::state::{InitOptions, LambdaInit};

const KEYS: &[&str] = &[
    "n_len",
    "m_count",
    "lag_lo",
    "lag_hi",
    "algorithm",
    "rho_multiplier",
    "epsilon",
    "max_iter",
    "seed",
    "sbcd_enabled",
    "sbcd_probability",
    "agd_enabled",
    "agd_momentum",
    "projection",
    "theory_checks",
    "output_dir",
    "lambda_init",
    "record_timing",
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub n_len: usize,
    pub m_count: usize,
    pub lag_lo: usize,
    /// Defaults to `n_len − 1`.
    pub lag_hi: usize,
    pub algorithm: Algorithm,
    pub rho_multiplier: f64,
    #[serde(serialize_with = "crate::output::ser_float")]
    pub epsilon: f64,
    pub max_iter: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub accel: AccelConfig,
    pub projection: Projection,
    pub theory_checks: TheoryChecks,
    pub output_dir: PathBuf,
    pub lambda_init: LambdaInit,
    pub record_timing: bool,
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub algorithm: Option<Algorithm>,
    pub output_dir: Option<PathBuf>,
}

fn type_err(key: &str, want: &str, v: &Value) -> Error {
    Error::config(key, format!("expected {want}, got {v}"))
}

fn as_usize(key: &str, v: &Value) -> Result<usize> {
    v.as_u64()
        .and_then(|u| usize::try_from(u).ok())
        .ok_or_else(|| type_err(key, "a non-negative integer", v))
}

fn as_f64(key: &str, v: &Value) -> Result<f64> {
    match v {
        Value::Number(n) => n.as_f64().ok_or_else(|| type_err(key, "a number", v)),
        Value::String(s) if s == "inf" => Ok(f64::INFINITY),
        _ => Err(type_err(key, "a number", v)),
    }
}

fn as_bool(key: &str, v: &Value) -> Result<bool> {
    v.as_bool().ok_or_else(|| type_err(key, "true or false", v))
}

fn as_choice<'a>(key: &str, v: &'a Value, choices: &[&str]) -> Result<&'a str> {
    match v.as_str() {
        Some(s) if choices.contains(&s) => Ok(s),
        _ => Err(type_err(key, &format!("one of {}", choices.join("|")), v)),
    }
}

pub fn parse_algorithm(s: &str) -> Result<Algorithm> {
    match s {
        "admm" => Ok(Algorithm::Admm),
        "pdmm" => Ok(Algorithm::Pdmm),
        _ => Err(Error::config(
            "algorithm",
            format!("expected admm|pdmm, got {s:?}"),
        )),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(source: &str) -> Result<RunConfig> {
    parse_with(source, &Overrides::default())
}

pub fn parse_with(source: &str, overrides: &Overrides) -> Result<RunConfig> {
    let value: Value = serde_json::from_str(source)?;
    let Value::Object(map) = value else {
        return Err(Error::config("<root>", "expected a JSON object"));
    };
    from_map(&map, overrides)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_with(&text, overrides)
}

fn from_map(map: &Map<String, Value>, overrides: &Overrides) -> Result<RunConfig> {
    if let Some(k) = map.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(Error::config(k.as_str(), "unknown key"));
    }
    let get = |k: &str| map.get(k);
    let required = |k: &str| -> Result<usize> {
        let v = get(k).ok_or_else(|| Error::config(k, "required"))?;
        let n = as_usize(k, v)?;
        if n == 0 {
            return Err(Error::config(k, "must be positive"));
        }
        Ok(n)
    };
    let n_len = required("n_len");
    let m_count = required("m_count");
    let (n_len, m_count) = (n_len?, m_count?);

    let mut accel = AccelConfig::default();
    if let Some(v) = get("sbcd_enabled") {
        accel.sbcd_enabled = as_bool("sbcd_enabled", v)?;
    }
    if let Some(v) = get("sbcd_probability") {
        accel.sbcd_probability = as_f64("sbcd_probability", v)?;
    }
    if let Some(v) = get("agd_enabled") {
        accel.agd_enabled = as_bool("agd_enabled", v)?;
    }
    if let Some(v) = get("agd_momentum") {
        accel.agd_momentum = as_f64("agd_momentum", v)?;
    }

    let algorithm = match (overrides.algorithm, get("algorithm")) {
        (Some(a), _) => a,
        (None, Some(v)) => parse_algorithm(as_choice("algorithm", v, &["admm", "pdmm"])?)?,
        (None, None) => Algorithm::Admm,
    };
    let projection = match get("projection") {
        Some(v) => match as_choice("projection", v, &["wrap", "clamp"])? {
            "clamp" => Projection::Clamp,
            _ => Projection::Wrap,
        },
        None => Projection::Wrap,
    };
    let theory_checks = match get("theory_checks") {
        Some(v) => match as_choice("theory_checks", v, &["off", "report", "strict"])? {
            "off" => TheoryChecks::Off,
            "strict" => TheoryChecks::Strict,
            _ => TheoryChecks::Report,
        },
        None => TheoryChecks::Report,
    };
    let lambda_init = match get("lambda_init") {
        Some(v) => match as_choice("lambda_init", v, &["uniform", "zero"])? {
            "zero" => LambdaInit::Zero,
            _ => LambdaInit::Uniform,
        },
        None => LambdaInit::Uniform,
    };
    let output_dir = match (&overrides.output_dir, get("output_dir")) {
        (Some(p), _) => p.clone(),
        (None, Some(v)) => PathBuf::from(
            v.as_str()
                .ok_or_else(|| type_err("output_dir", "a string", v))?,
        ),
        (None, None) => PathBuf::from("out"),
    };
    let seed = match (overrides.seed, get("seed")) {
        (Some(s), _) => s,
        (None, Some(v)) => v
            .as_u64()
            .ok_or_else(|| type_err("seed", "a 64-bit unsigned integer", v))?,
        (None, None) => 0,
    };

    let cfg = RunConfig {
        n_len,
        m_count,
        lag_lo: get("lag_lo")
            .map(|v| as_usize("lag_lo", v))
            .transpose()?
            .unwrap_or(0),
        lag_hi: get("lag_hi")
            .map(|v| as_usize("lag_hi", v))
            .transpose()?
            .unwrap_or(n_len - 1),
        algorithm,
        rho_multiplier: get("rho_multiplier")
            .map(|v| as_f64("rho_multiplier", v))
            .transpose()?
            .unwrap_or(9.0),
        epsilon: get("epsilon")
            .map(|v| as_f64("epsilon", v))
            .transpose()?
            .unwrap_or(DEFAULT_EPSILON),
        max_iter: get("max_iter")
            .map(|v| as_usize("max_iter", v))
            .transpose()?
            .unwrap_or(DEFAULT_MAX_ITER),
        seed,
        accel,
        projection,
        theory_checks,
        output_dir,
        lambda_init,
        record_timing: get("record_timing")
            .map(|v| as_bool("record_timing", v))
            .transpose()?
            .unwrap_or(false),
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    /// Minimal valid config with defaults for everything else.
    pub fn new(n_len: usize, m_count: usize, lag_lo: usize, lag_hi: usize) -> Self {
        Self {
            n_len,
            m_count,
            lag_lo,
            lag_hi,
            algorithm: Algorithm::Admm,
            rho_multiplier: 9.0,
            epsilon: DEFAULT_EPSILON,
            max_iter: DEFAULT_MAX_ITER,
            seed: 0,
            accel: AccelConfig::default(),
            projection: Projection::Wrap,
            theory_checks: TheoryChecks::Report,
            output_dir: PathBuf::from("out"),
            lambda_init: LambdaInit::Uniform,
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m_count < 2 {
            return Err(Error::config(
                "m_count",
                "at least two sequences are required",
            ));
        }
        if self.n_len < 2 {
            return Err(Error::config("n_len", "must be at least 2"));
        }
        if self.lag_lo > self.lag_hi {
            return Err(Error::config(
                "lag_lo",
                format!("lag_lo {} exceeds lag_hi {}", self.lag_lo, self.lag_hi),
            ));
        }
        if self.lag_hi >= self.n_len {
            return Err(Error::config(
                "lag_hi",
                format!("lag_hi {} must be below n_len {}", self.lag_hi, self.n_len),
            ));
        }
        if self.algorithm == Algorithm::Pdmm {
            if self.lag_lo != 0 {
                return Err(Error::config("lag_lo", "pdmm requires lag_lo = 0"));
            }
            if self.lag_hi == 0 {
                return Err(Error::config(
                    "lag_hi",
                    "pdmm needs at least one nonzero lag",
                ));
            }
        }
        if !(self.rho_multiplier > 0.0 && self.rho_multiplier.is_finite()) {
            return Err(Error::config(
                "rho_multiplier",
                "must be positive and finite",
            ));
        }
        if self.theory_checks == TheoryChecks::Strict && self.rho_multiplier < 9.0 {
            return Err(Error::config(
                "rho_multiplier",
                "strict theory checks need rho_multiplier >= 9",
            ));
        }
        if self.epsilon.is_nan() || self.epsilon <= 0.0 {
            return Err(Error::config("epsilon", "must be positive"));
        }
        self.accel.validate()
    }

    pub fn lag_set(&self) -> Result<LagSet> {
        LagSet::range(self.lag_lo, self.lag_hi, self.n_len)
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        self.validate()?;
        Ok(SolverConfig {
            n_len: self.n_len,
            m_count: self.m_count,
            lags: self.lag_set()?,
            algorithm: self.algorithm,
            init: InitOptions {
                rho_multiplier: self.rho_multiplier,
                lambda_init: self.lambda_init,
                seed: self.seed,
                theory_checked: self.theory_checks == TheoryChecks::Strict,
            },
            epsilon: self.epsilon,
            max_iter: self.max_iter,
            projection: self.projection,
            theory_checks: self.theory_checks,
            accel: self.accel,
            record_timing: self.record_timing,
        })
    }
}
