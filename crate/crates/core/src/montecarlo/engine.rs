//! Sweep execution, aggregation and CSV output.

use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    gen_geometric_channel, gen_rayleigh_channel, gen_virtual_channel, ChannelRealization,
};
use crate::combiner::{
    aoa_combiner_strongest, arv_tsac_select, build_codebook, digital_combiner, greedy_mi,
    selected_arvs, svd_combiner, AnalogCombinerPair, DigitalKind,
};
use crate::error::{Error, Result};
use crate::linalg::ComplexMatrix;
pub use crate::metrics::Estimate as Summary;
use crate::metrics::{
    mutual_information, per_user_rate, theory_ergodic_rate, theory_optimal_mi,
    theory_svd_upper_bound, ErgodicVariant, SvdBound, TheoryInputs,
};

use super::config::{ChannelModel, ExperimentConfig, Method, Metric, PointParams, TheoryOverlay};
use super::seed::{substream, trial_seed};

/// Substream tag for the random complement of the AoA combiner.
const AOA_STREAM: u64 = 1;

/// CSV header of [`SweepResult::write_csv`].
pub const CSV_HEADER: [&str; 14] = [
    "sweep_variable",
    "sweep_value",
    "method",
    "metric",
    "mean",
    "stderr",
    "trials",
    "n_r",
    "n_rf",
    "n_u",
    "bits",
    "snr_db",
    "channel_model",
    "seed",
];

/// Aggregate of one (sweep point, method) cell, or one theory overlay value.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub point_index: usize,
    pub point: PointParams,
    /// Method label, or the overlay label for theory rows.
    pub method: String,
    pub mean: f64,
    pub stderr: f64,
    /// Number of trials; zero for theory rows.
    pub trials: usize,
    /// Per-trial values in trial order; empty for theory rows.
    pub samples: Vec<f64>,
}

impl CellResult {
    pub fn is_theory(&self) -> bool {
        self.trials == 0
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub config: ExperimentConfig,
    /// Cells ordered by point, then configured methods, then overlays.
    pub cells: Vec<CellResult>,
    /// Wall-clock seconds per sweep point. Not part of the determinism
    /// contract.
    pub wall_times: Vec<f64>,
}

impl SweepResult {
    pub fn cell(&self, point_index: usize, method: &str) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.point_index == point_index && c.method == method)
    }

    /// Writes one CSV row per cell.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(CSV_HEADER).map_err(csv_error)?;
        let cfg = &self.config;
        for c in &self.cells {
            let p = &c.point;
            w.write_record([
                cfg.sweep_variable.label().to_string(),
                p.sweep_value.to_string(),
                c.method.clone(),
                cfg.metric.label().to_string(),
                c.mean.to_string(),
                c.stderr.to_string(),
                c.trials.to_string(),
                p.n_antennas.to_string(),
                p.n_rf.to_string(),
                p.n_users.to_string(),
                p.bits.to_string(),
                p.snr_db.to_string(),
                cfg.channel_model.label().to_string(),
                cfg.master_seed.to_string(),
            ])
            .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_csv_file(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Human-readable table of `mean ± stderr` per point and method.
    pub fn summary_table(&self) -> String {
        let cfg = &self.config;
        let mut labels: Vec<String> = cfg.methods.iter().map(|m| m.label().to_string()).collect();
        for o in &cfg.theory_overlays {
            labels.push(o.label().to_string());
        }
        let width = 18;
        let mut s = format!("{:>12}", cfg.sweep_variable.label());
        for l in &labels {
            s.push_str(&format!(" {l:>width$}"));
        }
        s.push('\n');
        let n_points = self
            .cells
            .iter()
            .map(|c| c.point_index + 1)
            .max()
            .unwrap_or(0);
        for p in 0..n_points {
            let value = self
                .cells
                .iter()
                .find(|c| c.point_index == p)
                .map(|c| c.point.sweep_value)
                .unwrap_or(f64::NAN);
            s.push_str(&format!("{value:>12}"));
            for l in &labels {
                let entry = match self.cell(p, l) {
                    Some(c) if c.is_theory() => format!("{:.3}", c.mean),
                    Some(c) => format!("{:.3} ± {:.3}", c.mean, c.stderr),
                    None => "-".to_string(),
                };
                s.push_str(&format!(" {entry:>width$}"));
            }
            s.push('\n');
        }
        s
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

/// Options for [`run_sweep_with`].
#[derive(Default)]
pub struct RunOptions<'a> {
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
    /// Called after each point with `(point_index, n_points, seconds)`.
    pub progress: Option<&'a (dyn Fn(usize, usize, f64) + Sync)>,
}

pub fn run_sweep(config: &ExperimentConfig) -> Result<SweepResult> {
    run_sweep_with(config, &RunOptions::default())
}

pub fn run_sweep_with_threads(config: &ExperimentConfig, threads: usize) -> Result<SweepResult> {
    run_sweep_with(
        config,
        &RunOptions {
            threads: Some(threads),
            progress: None,
        },
    )
}

/// Runs every point of the sweep. The configuration is validated for all
/// points before any trial runs.
pub fn run_sweep_with(config: &ExperimentConfig, opts: &RunOptions<'_>) -> Result<SweepResult> {
    let points = config.validate()?;
    match opts.threads {
        Some(0) => Err(Error::invalid("thread count must be positive")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(format!("cannot build thread pool: {e}")))?
            .install(|| run_points(config, &points, opts)),
        None => run_points(config, &points, opts),
    }
}

fn run_points(
    config: &ExperimentConfig,
    points: &[PointParams],
    opts: &RunOptions<'_>,
) -> Result<SweepResult> {
    let mut cells = Vec::new();
    let mut wall_times = Vec::with_capacity(points.len());
    for (pi, point) in points.iter().enumerate() {
        let start = Instant::now();
        let per_trial: Vec<Vec<f64>> = (0..config.n_trials)
            .into_par_iter()
            .map(|t| evaluate_trial(config, point, pi, t))
            .collect::<Result<_>>()?;
        for (mi, m) in config.methods.iter().enumerate() {
            let samples: Vec<f64> = per_trial.iter().map(|row| row[mi]).collect();
            let s = Summary::from_samples(&samples);
            cells.push(CellResult {
                point_index: pi,
                point: *point,
                method: m.label().to_string(),
                mean: s.mean,
                stderr: s.stderr,
                trials: samples.len(),
                samples,
            });
        }
        for o in &config.theory_overlays {
            if let Some(v) = overlay_value(*o, point)? {
                cells.push(CellResult {
                    point_index: pi,
                    point: *point,
                    method: o.label().to_string(),
                    mean: v,
                    stderr: 0.0,
                    trials: 0,
                    samples: Vec::new(),
                });
            }
        }
        let secs = start.elapsed().as_secs_f64();
        wall_times.push(secs);
        if let Some(cb) = opts.progress {
            cb(pi, points.len(), secs);
        }
    }
    Ok(SweepResult {
        config: config.clone(),
        cells,
        wall_times,
    })
}

/// Theory value at one point, or `None` when it does not exist (the SVD
/// ceiling with ideal quantization).
pub fn overlay_value(overlay: TheoryOverlay, point: &PointParams) -> Result<Option<f64>> {
    let q = point.quantizer();
    let mut inputs = TheoryInputs::new(point.n_users, point.n_rf, point.snr(), q);
    inputs.n_antennas = point.n_antennas;
    inputs.paths_per_user = point.paths_per_user.unwrap_or(1);
    Ok(match overlay {
        TheoryOverlay::Eq13 => match theory_svd_upper_bound(point.n_users, &q) {
            SvdBound::Finite(v) => Some(v),
            SvdBound::Unbounded => None,
        },
        TheoryOverlay::Eq14 => {
            inputs.singular_value = point.n_antennas as f64;
            Some(theory_optimal_mi(&inputs)?)
        }
        TheoryOverlay::Eq29 => Some(theory_ergodic_rate(ErgodicVariant::TwoStage, &inputs)?),
        TheoryOverlay::Eq31 => Some(theory_ergodic_rate(ErgodicVariant::OneStage, &inputs)?),
    })
}

/// Channel drawn for one trial, in the domain the combiners operate on.
enum TrialChannel {
    /// Antenna-domain channel with its path parameters.
    Antenna(ChannelRealization),
    /// Beamspace channel `N_RF x N_u`.
    Beamspace(ComplexMatrix),
}

fn draw_channel(config: &ExperimentConfig, point: &PointParams, seed: u64) -> Result<TrialChannel> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match config.channel_model {
        ChannelModel::Geometric => TrialChannel::Antenna(gen_geometric_channel(
            point.n_antennas,
            point.n_users,
            point.mean_paths.expect("validated"),
            point.d_over_lambda,
            &mut rng,
        )?),
        ChannelModel::Rayleigh => TrialChannel::Antenna(gen_rayleigh_channel(
            point.n_antennas,
            point.n_users,
            &mut rng,
        )?),
        ChannelModel::Virtual => TrialChannel::Beamspace(
            gen_virtual_channel(
                point.n_rf,
                point.n_users,
                point.paths_per_user.expect("validated"),
                point.n_antennas,
                &mut rng,
            )?
            .h_b,
        ),
    })
}

fn fingerprint(h: &ComplexMatrix) -> u64 {
    let mut hasher = DefaultHasher::new();
    for z in h.iter() {
        z.re.to_bits().hash(&mut hasher);
        z.im.to_bits().hash(&mut hasher);
    }
    hasher.finish()
}

/// Evaluates every configured method on the channel of trial `trial` at
/// point `point_index`. Values follow the order of `config.methods`.
pub fn evaluate_trial(
    config: &ExperimentConfig,
    point: &PointParams,
    point_index: usize,
    trial: usize,
) -> Result<Vec<f64>> {
    let seed = trial_seed(config.master_seed, point_index, trial);
    let channel = draw_channel(config, point, seed)?;
    let snr = point.snr();
    let q = point.quantizer();
    let n_rf = point.n_rf;

    let h = match &channel {
        TrialChannel::Antenna(c) => &c.h,
        TrialChannel::Beamspace(h_b) => h_b,
    };
    log::debug!(
        "point {point_index} trial {trial} seed {seed:016x} channel {:016x}",
        fingerprint(h)
    );

    // The ARV selection is shared by ARV_TSAC and ARV_ONLY.
    let mut arv_first: Option<ComplexMatrix> = None;
    let mut arv_stage = |h: &ComplexMatrix| -> Result<ComplexMatrix> {
        if let Some(w) = &arv_first {
            return Ok(w.clone());
        }
        let w = match &channel {
            TrialChannel::Antenna(_) => {
                let codebook = build_codebook(h.nrows())?;
                let sel = arv_tsac_select(h, n_rf, &codebook)?;
                selected_arvs(h.nrows(), &codebook, &sel.indices)
            }
            // In beamspace the selected beams are the coordinate axes.
            TrialChannel::Beamspace(_) => ComplexMatrix::identity(n_rf, n_rf),
        };
        arv_first = Some(w.clone());
        Ok(w)
    };

    let mut values = Vec::with_capacity(config.methods.len());
    for method in &config.methods {
        let pair = match method {
            Method::ArvTsac => AnalogCombinerPair::with_dft(arv_stage(h)?),
            Method::ArvOnly => AnalogCombinerPair::one_stage(arv_stage(h)?),
            Method::SvdDft => svd_combiner(h, n_rf, true)?,
            Method::Svd => svd_combiner(h, n_rf, false)?,
            Method::GreedyMi => {
                let codebook = build_codebook(h.nrows())?;
                greedy_mi(h, n_rf, &codebook, snr, &q)?
            }
            Method::AoaDft => match &channel {
                TrialChannel::Antenna(c) => {
                    let mut rng = substream(seed, AOA_STREAM);
                    aoa_combiner_strongest(c, n_rf, &mut rng)?
                }
                TrialChannel::Beamspace(_) => unreachable!("rejected by validation"),
            },
        };
        let value = match config.metric {
            Metric::Mi => mutual_information(&pair.product, h, snr, &q)?,
            Metric::SumRate => {
                let kind: DigitalKind = config.digital.expect("validated");
                let h_eq = pair.product.adjoint() * h;
                let w_bb = digital_combiner(kind, &h_eq, &pair.product, snr, &q)?;
                per_user_rate(&pair.product, &w_bb, h, snr, &q)?.sum_rate
            }
        };
        values.push(value);
    }
    Ok(values)
}
