//! Ready-made sweeps for each figure of the study.
//!
//! `paper` scale uses the published system sizes. `desk` scale shrinks the
//! arrays (about `N_r = 64`, `N_RF = 22`, `N_u = 4`) while keeping the ratios
//! `N_RF / N_r` and `N_u / N_RF` close to the published ones.

use std::fmt;
use std::str::FromStr;

use crate::combiner::DigitalKind;
use crate::error::{Error, Result};
use crate::quantizer::Bits;

use super::config::{
    ChannelModel, ExperimentConfig, FixedParams, Method, Metric, SweepVariable, TheoryOverlay,
};

/// Master seed shared by all presets.
pub const PRESET_SEED: u64 = 20_240_101;

pub const DESK_TRIALS: usize = 500;
pub const PAPER_TRIALS: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Preset {
    MiVsSnr,
    MiVsNrfFixedNr,
    MiVsNrfFixedRatio,
    RateVsSnr,
    RateVsNrf,
    RateVsBits,
    TheoryVsSim,
}

impl Preset {
    pub const ALL: [Preset; 7] = [
        Preset::MiVsSnr,
        Preset::MiVsNrfFixedNr,
        Preset::MiVsNrfFixedRatio,
        Preset::RateVsSnr,
        Preset::RateVsNrf,
        Preset::RateVsBits,
        Preset::TheoryVsSim,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Preset::MiVsSnr => "fig_mi_vs_snr",
            Preset::MiVsNrfFixedNr => "fig_mi_vs_nrf_fixed_nr",
            Preset::MiVsNrfFixedRatio => "fig_mi_vs_nrf_fixed_ratio",
            Preset::RateVsSnr => "fig_rate_vs_snr",
            Preset::RateVsNrf => "fig_rate_vs_nrf",
            Preset::RateVsBits => "fig_rate_vs_bits",
            Preset::TheoryVsSim => "fig_theory_vs_sim",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Preset::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Preset::ALL.iter().map(|p| p.name()).collect();
                Error::invalid(format!(
                    "unknown preset '{s}' (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Scale {
    #[default]
    Desk,
    Paper,
}

impl FromStr for Scale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Scale::Desk),
            "paper" => Ok(Scale::Paper),
            _ => Err(Error::invalid(format!(
                "unknown scale '{s}' (expected desk or paper)"
            ))),
        }
    }
}

const FIVE_METHODS: [Method; 5] = [
    Method::ArvTsac,
    Method::SvdDft,
    Method::GreedyMi,
    Method::ArvOnly,
    Method::Svd,
];

fn fixed(n_antennas: Option<usize>, n_rf: Option<usize>, n_users: usize) -> FixedParams {
    FixedParams {
        n_antennas,
        n_rf,
        kappa: None,
        n_users,
        mean_paths: None,
        paths_per_user: None,
        bits: Some(Bits::Finite(2)),
        snr_db: None,
        d_over_lambda: crate::channel::DEFAULT_D_OVER_LAMBDA,
    }
}

/// Builds the configuration of a figure preset at the given scale.
pub fn figure_preset(preset: Preset, scale: Scale) -> ExperimentConfig {
    let paper = scale == Scale::Paper;
    // (N_r, N_RF, N_u) of the fixed-size presets.
    let (n_r, n_rf, n_u) = if paper { (128, 43, 8) } else { (64, 22, 4) };
    let n_trials = if paper { PAPER_TRIALS } else { DESK_TRIALS };
    let ratio_antennas: Vec<f64> = if paper {
        vec![48.0, 96.0, 192.0, 384.0]
    } else {
        vec![24.0, 48.0, 96.0, 192.0]
    };
    let snr_grid = vec![-20.0, -10.0, 0.0, 10.0, 20.0, 30.0];

    let mut cfg = ExperimentConfig {
        channel_model: ChannelModel::Geometric,
        methods: FIVE_METHODS.to_vec(),
        digital: None,
        metric: Metric::Mi,
        sweep_variable: SweepVariable::SnrDb,
        sweep_values: snr_grid.clone(),
        n_trials,
        master_seed: PRESET_SEED,
        theory_overlays: Vec::new(),
        fixed_params: fixed(Some(n_r), Some(n_rf), n_u),
    };
    match preset {
        Preset::MiVsSnr => {
            cfg.fixed_params.mean_paths = Some(3.0);
            cfg.theory_overlays = vec![TheoryOverlay::Eq13];
        }
        Preset::MiVsNrfFixedNr => {
            cfg.fixed_params = fixed(Some(if paper { 256 } else { 128 }), None, n_u);
            cfg.fixed_params.mean_paths = Some(4.0);
            cfg.fixed_params.snr_db = Some(0.0);
            cfg.sweep_variable = SweepVariable::NRf;
            cfg.sweep_values = if paper {
                vec![16.0, 32.0, 64.0, 128.0]
            } else {
                vec![8.0, 16.0, 32.0, 64.0]
            };
        }
        Preset::MiVsNrfFixedRatio => {
            cfg.fixed_params = fixed(None, None, n_u);
            cfg.fixed_params.kappa = Some(1.0 / 3.0);
            cfg.fixed_params.mean_paths = Some(4.0);
            cfg.fixed_params.snr_db = Some(0.0);
            cfg.sweep_variable = SweepVariable::NAntennas;
            cfg.sweep_values = ratio_antennas;
        }
        Preset::RateVsSnr => {
            cfg.fixed_params.mean_paths = Some(3.0);
            cfg.metric = Metric::SumRate;
            cfg.digital = Some(DigitalKind::Mrc);
        }
        Preset::RateVsNrf => {
            cfg.fixed_params = fixed(None, None, n_u);
            cfg.fixed_params.kappa = Some(1.0 / 3.0);
            cfg.fixed_params.mean_paths = Some(3.0);
            cfg.fixed_params.snr_db = Some(0.0);
            cfg.metric = Metric::SumRate;
            cfg.digital = Some(DigitalKind::Mrc);
            cfg.sweep_variable = SweepVariable::NAntennas;
            cfg.sweep_values = ratio_antennas;
        }
        Preset::RateVsBits => {
            cfg.fixed_params.mean_paths = Some(3.0);
            cfg.fixed_params.snr_db = Some(0.0);
            cfg.fixed_params.bits = None;
            cfg.metric = Metric::SumRate;
            cfg.digital = Some(DigitalKind::Mrc);
            cfg.sweep_variable = SweepVariable::Bits;
            cfg.sweep_values = (1..=8).map(f64::from).collect();
        }
        Preset::TheoryVsSim => {
            cfg.channel_model = ChannelModel::Virtual;
            cfg.methods = vec![Method::ArvTsac, Method::ArvOnly];
            cfg.fixed_params.paths_per_user = Some(8);
            cfg.metric = Metric::SumRate;
            cfg.digital = Some(DigitalKind::Mrc);
            cfg.sweep_values = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
            cfg.theory_overlays = vec![TheoryOverlay::Eq29, TheoryOverlay::Eq31];
        }
    }
    cfg
}
