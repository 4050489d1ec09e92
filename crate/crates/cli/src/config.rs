//! Plain-text experiment configs: `key = value` lines under `[section]`
//! headers. Every run is fully determined by the file plus the seed inside
//! it, so experiments diff cleanly.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use open_markets::model::{ModelSpec, VolSpec};

#[derive(Debug)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error at {}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(field: &str, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        field: field.to_string(),
        message: message.into(),
    })
}

/// Raw parsed sections.
#[derive(Debug, Default)]
pub struct RawConfig {
    sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut sections: BTreeMap<String, BTreeMap<String, String>> = BTreeMap::new();
        let mut current = String::from("");
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') {
                    return err(
                        &format!("line {}", lineno + 1),
                        format!("malformed section header '{line}'"),
                    );
                }
                current = line[1..line.len() - 1].trim().to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return err(
                    &format!("line {}", lineno + 1),
                    format!("expected 'key = value', got '{line}'"),
                );
            };
            sections
                .entry(current.clone())
                .or_default()
                .insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(RawConfig { sections })
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections
            .get(section)
            .and_then(|s| s.get(key))
            .map(|s| s.as_str())
    }

    fn require(&self, section: &str, key: &str) -> Result<&str, ConfigError> {
        self.get(section, key)
            .ok_or_else(|| ConfigError {
                field: format!("{section}.{key}"),
                message: "missing".into(),
            })
    }

    fn parse_f64(&self, section: &str, key: &str) -> Result<f64, ConfigError> {
        let raw = self.require(section, key)?;
        raw.parse()
            .map_err(|_| ConfigError {
                field: format!("{section}.{key}"),
                message: format!("'{raw}' is not a number"),
            })
    }

    fn parse_f64_or(&self, section: &str, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(_) => self.parse_f64(section, key),
        }
    }

    fn parse_usize(&self, section: &str, key: &str) -> Result<usize, ConfigError> {
        let raw = self.require(section, key)?;
        raw.parse().map_err(|_| ConfigError {
            field: format!("{section}.{key}"),
            message: format!("'{raw}' is not a nonnegative integer"),
        })
    }

    fn parse_usize_or(&self, section: &str, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(section, key) {
            None => Ok(default),
            Some(_) => self.parse_usize(section, key),
        }
    }

    fn parse_list(&self, section: &str, key: &str) -> Result<Vec<f64>, ConfigError> {
        let raw = self.require(section, key)?;
        raw.split(',')
            .map(|v| {
                v.trim().parse().map_err(|_| ConfigError {
                    field: format!("{section}.{key}"),
                    message: format!("'{v}' is not a number"),
                })
            })
            .collect()
    }

    fn parse_list_or(
        &self,
        section: &str,
        key: &str,
        default: &[f64],
    ) -> Result<Vec<f64>, ConfigError> {
        match self.get(section, key) {
            None => Ok(default.to_vec()),
            Some(_) => self.parse_list(section, key),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Simulate,
    Numeraire,
    MasterFormula,
    Leakage,
    Universal,
    Capm,
    Viability,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Numeraire => "numeraire",
            ExperimentKind::MasterFormula => "masterformula",
            ExperimentKind::Leakage => "leakage",
            ExperimentKind::Universal => "universal",
            ExperimentKind::Capm => "capm",
            ExperimentKind::Viability => "viability",
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeneratorConfig {
    pub name: String,
    pub p: f64,
    pub coefficients: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub output: PathBuf,
    pub seed: u64,
    pub ensemble: usize,
    pub model: ModelSpec,
    pub n_assets: usize,
    pub top_n: usize,
    pub horizon: f64,
    pub dt: f64,
    // kind-specific knobs, defaulted when absent
    pub test_portfolios: usize,
    pub generator: GeneratorConfig,
    pub tolerance: f64,
    pub samples: usize,
    pub horizons: Vec<f64>,
    pub capm_lambda: f64,
    pub explosion_threshold: f64,
}

impl ExperimentConfig {
    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn from_text(text: &str) -> Result<Self, ConfigError> {
        let raw = RawConfig::parse(text)?;

        let kind = match raw.require("experiment", "kind")? {
            "simulate" => ExperimentKind::Simulate,
            "numeraire" => ExperimentKind::Numeraire,
            "masterformula" => ExperimentKind::MasterFormula,
            "leakage" => ExperimentKind::Leakage,
            "universal" => ExperimentKind::Universal,
            "capm" => ExperimentKind::Capm,
            "viability" => ExperimentKind::Viability,
            other => {
                return err(
                    "experiment.kind",
                    format!(
                        "unknown kind '{other}' (expected simulate|numeraire|masterformula|leakage|universal|capm|viability)"
                    ),
                )
            }
        };
        let output = PathBuf::from(raw.require("experiment", "output")?);
        let seed = raw
            .require("experiment", "seed")?
            .parse()
            .map_err(|_| ConfigError {
                field: "experiment.seed".into(),
                message: "seed must be an unsigned integer (no implicit entropy)".into(),
            })?;
        let ensemble = raw.parse_usize_or("experiment", "ensemble", 1)?;
        if ensemble < 1 {
            return err("experiment.ensemble", "must be >= 1");
        }

        let n_assets = raw.parse_usize("model", "assets")?;
        let top_n = raw.parse_usize("model", "top")?;
        if n_assets < 2 {
            return err("model.assets", "need at least 2 assets");
        }
        if top_n < 1 || top_n >= n_assets {
            return err("model.top", "open market requires 1 <= n < N");
        }
        let initial = raw.parse_list("model", "initial")?;
        if initial.len() != n_assets {
            return err(
                "model.initial",
                format!("expected {n_assets} prices, got {}", initial.len()),
            );
        }
        let model = match raw.require("model", "kind")? {
            "gbm" => {
                let drift = raw.parse_list("model", "drift")?;
                if drift.len() != n_assets {
                    return err("model.drift", format!("need {n_assets} entries"));
                }
                // either a diagonal vol list, or factor loadings plus
                // idiosyncratic vols building a one-factor covariance
                let vol = if raw.get("model", "factor").is_some() {
                    let factor = raw.parse_list("model", "factor")?;
                    let idio = raw.parse_list("model", "idio")?;
                    if factor.len() != n_assets || idio.len() != n_assets {
                        return err(
                            "model.factor",
                            format!("factor/idio need {n_assets} entries"),
                        );
                    }
                    let loadings = (0..n_assets)
                        .map(|i| {
                            let mut row = vec![0.0; n_assets + 1];
                            row[0] = factor[i];
                            row[i + 1] = idio[i];
                            row
                        })
                        .collect();
                    VolSpec::Matrix(loadings)
                } else {
                    let vol = raw.parse_list("model", "vol")?;
                    if vol.len() != n_assets {
                        return err("model.vol", format!("need {n_assets} entries"));
                    }
                    VolSpec::Diagonal(vol)
                };
                ModelSpec::Gbm {
                    initial_prices: initial,
                    drift,
                    vol,
                }
            }
            "atlas" => {
                let rank_drift = raw.parse_list("model", "rank_drift")?;
                let rank_vol = raw.parse_list("model", "rank_vol")?;
                if rank_drift.len() != n_assets || rank_vol.len() != n_assets {
                    return err(
                        "model.rank_drift",
                        format!("rank_drift/rank_vol need {n_assets} entries"),
                    );
                }
                ModelSpec::Atlas {
                    initial_prices: initial,
                    rank_drift,
                    rank_vol,
                }
            }
            other => return err("model.kind", format!("unknown model '{other}'")),
        };
        if let Err(e) = model.validate() {
            return err("model", e.to_string());
        }

        let horizon = raw.parse_f64("grid", "horizon")?;
        let dt = raw.parse_f64("grid", "dt")?;
        if !(dt > 0.0) {
            return err("grid.dt", "must be > 0");
        }
        if !(horizon > dt) {
            return err("grid.horizon", "must exceed dt");
        }

        let generator = GeneratorConfig {
            name: raw
                .get("masterformula", "generator")
                .unwrap_or("diversity")
                .to_string(),
            p: raw.parse_f64_or("masterformula", "p", 0.5)?,
            coefficients: raw.parse_list_or("masterformula", "coefficients", &[])?,
        };

        let config = ExperimentConfig {
            kind,
            output,
            seed,
            ensemble,
            model,
            n_assets,
            top_n,
            horizon,
            dt,
            test_portfolios: raw.parse_usize_or("numeraire", "tests", 10)?,
            generator,
            tolerance: raw.parse_f64_or("experiment", "tolerance", 0.05)?,
            samples: raw.parse_usize_or("universal", "samples", 1000)?,
            horizons: raw.parse_list_or("universal", "horizons", &[])?,
            capm_lambda: raw.parse_f64_or("capm", "lambda", 2.0)?,
            explosion_threshold: raw.parse_f64_or("viability", "explosion_threshold", 1e6)?,
        };
        if config.steps() < 2 {
            return err("grid", "horizon/dt yields fewer than 2 steps");
        }
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            field: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_text(&text)
    }
}
