//! Experiment configuration and its validation.
//!
//! Configurations are read from TOML documents whose keys mirror the
//! [`ExperimentConfig`] fields:
//!
//! ```toml
//! channel_model = "geometric"
//! methods = ["ARV_TSAC", "SVD_DFT"]
//! metric = "MI"
//! sweep_variable = "snr_db"
//! sweep_values = [-10.0, 0.0, 10.0]
//! n_trials = 100
//! master_seed = 1
//! theory_overlays = ["EQ13"]
//!
//! [fixed_params]
//! n_antennas = 64
//! n_rf = 22
//! n_users = 4
//! mean_paths = 3.0
//! bits = 2
//! ```

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::DEFAULT_D_OVER_LAMBDA;
use crate::combiner::DigitalKind;
use crate::error::{Error, Result};
use crate::quantizer::{Bits, QuantizerModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChannelModel {
    Geometric,
    Rayleigh,
    /// Beamspace channel with `L` nonzero entries per user.
    Virtual,
}

impl ChannelModel {
    pub fn label(&self) -> &'static str {
        match self {
            ChannelModel::Geometric => "geometric",
            ChannelModel::Rayleigh => "rayleigh",
            ChannelModel::Virtual => "virtual",
        }
    }
}

impl fmt::Display for ChannelModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Analog combining method.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    /// Greedy ARV selection followed by the DFT stage.
    ArvTsac,
    /// The same ARV selection without the DFT stage.
    ArvOnly,
    SvdDft,
    Svd,
    GreedyMi,
    /// True-path ARVs plus an orthonormal complement, followed by the DFT.
    AoaDft,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::ArvTsac,
        Method::ArvOnly,
        Method::SvdDft,
        Method::Svd,
        Method::GreedyMi,
        Method::AoaDft,
    ];

    pub fn label(&self) -> &'static str {
        match self {
            Method::ArvTsac => "ARV_TSAC",
            Method::ArvOnly => "ARV_ONLY",
            Method::SvdDft => "SVD_DFT",
            Method::Svd => "SVD",
            Method::GreedyMi => "GREEDY_MI",
            Method::AoaDft => "AOA_DFT",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Metric {
    /// Mutual information of the analog combiner.
    Mi,
    /// Sum of per-user rates with the configured digital combiner.
    SumRate,
}

impl Metric {
    pub fn label(&self) -> &'static str {
        match self {
            Metric::Mi => "MI",
            Metric::SumRate => "SUM_RATE",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    NRf,
    NAntennas,
    Bits,
}

impl SweepVariable {
    pub fn label(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::NRf => "n_rf",
            SweepVariable::NAntennas => "n_antennas",
            SweepVariable::Bits => "bits",
        }
    }
}

impl fmt::Display for SweepVariable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Closed-form curve evaluated once per sweep point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum TheoryOverlay {
    /// One-stage SVD ceiling (skipped for ideal quantization).
    Eq13,
    /// Optimal MI with homogeneous singular value `lambda = N_r`.
    Eq14,
    /// Two-stage MRC ergodic rate on beamspace channels.
    Eq29,
    /// One-stage MRC ergodic rate on beamspace channels.
    Eq31,
}

impl TheoryOverlay {
    pub fn label(&self) -> &'static str {
        match self {
            TheoryOverlay::Eq13 => "EQ13",
            TheoryOverlay::Eq14 => "EQ14",
            TheoryOverlay::Eq29 => "EQ29",
            TheoryOverlay::Eq31 => "EQ31",
        }
    }
}

fn default_d_over_lambda() -> f64 {
    DEFAULT_D_OVER_LAMBDA
}

/// Parameters shared by every sweep point; the swept one may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_antennas: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_rf: Option<usize>,
    /// RF-chain ratio; sets `n_rf = ceil(kappa * n_antennas)` when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    pub n_users: usize,
    /// Poisson mean of the path count (geometric channels).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_paths: Option<f64>,
    /// Nonzero beams per user (virtual channels).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paths_per_user: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bits: Option<Bits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    #[serde(default = "default_d_over_lambda")]
    pub d_over_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub channel_model: ChannelModel,
    pub methods: Vec<Method>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub digital: Option<DigitalKind>,
    pub metric: Metric,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub n_trials: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub theory_overlays: Vec<TheoryOverlay>,
    pub fixed_params: FixedParams,
}

/// Fully resolved parameters of one sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointParams {
    pub sweep_value: f64,
    pub n_antennas: usize,
    pub n_rf: usize,
    pub n_users: usize,
    pub bits: Bits,
    pub snr_db: f64,
    pub mean_paths: Option<f64>,
    pub paths_per_user: Option<usize>,
    pub d_over_lambda: f64,
}

impl PointParams {
    pub fn snr(&self) -> f64 {
        crate::db_to_linear(self.snr_db)
    }

    pub fn quantizer(&self) -> QuantizerModel {
        QuantizerModel::new(self.bits).expect("bits validated")
    }
}

fn positive_integer(field: &str, v: f64) -> Result<usize> {
    if v.is_finite() && v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::config(
            field,
            format!("expected a positive integer, got {v}"),
        ))
    }
}

/// `ceil(kappa * n)` with a small allowance for rounding in `kappa`.
pub fn rf_chains_for_ratio(kappa: f64, n_antennas: usize) -> usize {
    (kappa * n_antennas as f64 - 1e-9).ceil().max(1.0) as usize
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let msg = e.message().to_string();
            let field = msg
                .split('`')
                .nth(1)
                .map(str::to_string)
                .unwrap_or_else(|| "config".to_string());
            Error::config(field, msg)
        })?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config("config", e.to_string()))
    }

    /// Checks every invariant and resolves all sweep points.
    pub fn validate(&self) -> Result<Vec<PointParams>> {
        if self.n_trials == 0 {
            return Err(Error::config("n_trials", "must be positive"));
        }
        if self.methods.is_empty() {
            return Err(Error::config("methods", "at least one method is required"));
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::config("methods", format!("{m} is listed twice")));
            }
        }
        for (i, o) in self.theory_overlays.iter().enumerate() {
            if self.theory_overlays[..i].contains(o) {
                return Err(Error::config(
                    "theory_overlays",
                    format!("{} is listed twice", o.label()),
                ));
            }
        }
        if self.sweep_values.is_empty() {
            return Err(Error::config("sweep_values", "must not be empty"));
        }
        let increasing = self.sweep_values.windows(2).all(|w| w[0] < w[1]);
        let decreasing = self.sweep_values.windows(2).all(|w| w[0] > w[1]);
        if !(increasing || decreasing) {
            return Err(Error::config("sweep_values", "must be strictly monotone"));
        }
        match (self.metric, self.digital) {
            (Metric::SumRate, None) => {
                return Err(Error::config(
                    "digital",
                    "SUM_RATE needs a digital combiner",
                ))
            }
            (Metric::Mi, Some(_)) => {
                return Err(Error::config(
                    "digital",
                    "only used with the SUM_RATE metric",
                ))
            }
            _ => {}
        }
        let fp = &self.fixed_params;
        if !(fp.d_over_lambda > 0.0 && fp.d_over_lambda.is_finite()) {
            return Err(Error::config(
                "fixed_params.d_over_lambda",
                "must be positive",
            ));
        }
        if let Some(k) = fp.kappa {
            if !(k > 0.0 && k <= 1.0) {
                return Err(Error::config("fixed_params.kappa", "must lie in (0, 1]"));
            }
            if fp.n_rf.is_some() || self.sweep_variable == SweepVariable::NRf {
                return Err(Error::config(
                    "fixed_params.kappa",
                    "kappa and n_rf cannot both determine the RF chain count",
                ));
            }
        }
        for m in &self.methods {
            match m {
                Method::GreedyMi if self.channel_model == ChannelModel::Virtual => {
                    return Err(Error::config(
                        "methods",
                        "GREEDY_MI needs an antenna-domain channel, not the virtual model",
                    ))
                }
                Method::AoaDft if self.channel_model != ChannelModel::Geometric => {
                    return Err(Error::config(
                        "methods",
                        "AOA_DFT needs the geometric channel",
                    ))
                }
                Method::AoaDft if self.metric == Metric::SumRate => {
                    return Err(Error::config(
                        "methods",
                        "AOA_DFT is not semi-unitary, so it only supports the MI metric",
                    ))
                }
                _ => {}
            }
        }
        self.sweep_values
            .iter()
            .map(|&v| self.resolve_point(v))
            .collect()
    }

    fn resolve_point(&self, v: f64) -> Result<PointParams> {
        let fp = &self.fixed_params;
        let var = self.sweep_variable;
        let sweep_field = "sweep_values";
        let n_antennas = match var {
            SweepVariable::NAntennas => positive_integer(sweep_field, v)?,
            _ => fp
                .n_antennas
                .ok_or_else(|| Error::config("fixed_params.n_antennas", "missing"))?,
        };
        let n_rf = match (var, fp.kappa) {
            (SweepVariable::NRf, _) => positive_integer(sweep_field, v)?,
            (_, Some(k)) => rf_chains_for_ratio(k, n_antennas),
            _ => fp
                .n_rf
                .ok_or_else(|| Error::config("fixed_params.n_rf", "missing (or give kappa)"))?,
        };
        let bits = match var {
            SweepVariable::Bits => {
                Bits::from_f64(v).map_err(|e| Error::config(sweep_field, e.to_string()))?
            }
            _ => fp
                .bits
                .ok_or_else(|| Error::config("fixed_params.bits", "missing"))?,
        };
        let snr_db = match var {
            SweepVariable::SnrDb => v,
            _ => fp
                .snr_db
                .ok_or_else(|| Error::config("fixed_params.snr_db", "missing"))?,
        };
        if !snr_db.is_finite() {
            return Err(Error::config(
                "snr_db",
                format!("must be finite, got {snr_db}"),
            ));
        }
        let n_users = fp.n_users;
        if n_users == 0 {
            return Err(Error::config("fixed_params.n_users", "must be positive"));
        }
        if n_users > n_rf {
            return Err(Error::config(
                "fixed_params.n_users",
                format!("n_users = {n_users} exceeds n_rf = {n_rf} at {var} = {v}"),
            ));
        }
        if n_rf > n_antennas {
            return Err(Error::config(
                "fixed_params.n_rf",
                format!("n_rf = {n_rf} exceeds n_antennas = {n_antennas} at {var} = {v}"),
            ));
        }
        match self.channel_model {
            ChannelModel::Geometric => match fp.mean_paths {
                Some(m) if m.is_finite() && m >= 0.0 => {}
                Some(m) => {
                    return Err(Error::config(
                        "fixed_params.mean_paths",
                        format!("must be nonnegative, got {m}"),
                    ))
                }
                None => return Err(Error::config("fixed_params.mean_paths", "missing")),
            },
            ChannelModel::Virtual => match fp.paths_per_user {
                Some(l) if l >= 1 && l <= n_rf => {}
                Some(l) => {
                    return Err(Error::config(
                        "fixed_params.paths_per_user",
                        format!("must lie in 1..=n_rf ({n_rf}), got {l}"),
                    ))
                }
                None => return Err(Error::config("fixed_params.paths_per_user", "missing")),
            },
            ChannelModel::Rayleigh => {}
        }
        for o in &self.theory_overlays {
            if matches!(o, TheoryOverlay::Eq29 | TheoryOverlay::Eq31)
                && self.channel_model != ChannelModel::Virtual
            {
                return Err(Error::config(
                    "theory_overlays",
                    format!("{} needs the virtual channel model", o.label()),
                ));
            }
        }
        Ok(PointParams {
            sweep_value: v,
            n_antennas,
            n_rf,
            n_users,
            bits,
            snr_db,
            mean_paths: fp.mean_paths,
            paths_per_user: fp.paths_per_user,
            d_over_lambda: fp.d_over_lambda,
        })
    }
}
