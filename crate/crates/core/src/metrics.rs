//! Mutual information, achievable rates and the closed-form theory.
//!
//! All SNRs here are linear. The MI is evaluated as
//! `log2 |I + rho a^2 (a^2 W^H W + R_qq)^-1 W^H H H^H W|` through Cholesky
//! factorizations of Hermitian positive-definite matrices, using the
//! determinant identity to reduce it to an `N_u x N_u` determinant.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::gen_virtual_channel;
use crate::combiner::{dft_matrix, DigitalCombiner};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_cholesky, hermitian_log_det, semi_unitary_deviation, ComplexMatrix};
use crate::montecarlo::seed::derive_seed;
use crate::quantizer::{quantization_covariance_from_parts, QuantizerModel};

/// Tolerance on `max |W^H W - I|` for the rate formulas.
pub const SEMI_UNITARY_TOL: f64 = 1e-8;

/// Mutual information (bits/s/Hz) between the user symbols and the quantized
/// combiner output under the AQNM.
pub fn mutual_information(
    w_rf: &ComplexMatrix,
    h: &ComplexMatrix,
    snr: f64,
    q: &QuantizerModel,
) -> Result<f64> {
    if w_rf.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W_RF is {}x{} but H has {} rows",
            w_rf.nrows(),
            w_rf.ncols(),
            h.nrows()
        )));
    }
    mutual_information_from_parts(&(w_rf.adjoint() * h), &(w_rf.adjoint() * w_rf), snr, q)
}

/// [`mutual_information`] given `G = W^H H` and `W^H W`.
pub(crate) fn mutual_information_from_parts(
    g: &ComplexMatrix,
    gram: &ComplexMatrix,
    snr: f64,
    q: &QuantizerModel,
) -> Result<f64> {
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!(
            "snr must be nonnegative, got {snr}"
        )));
    }
    if snr == 0.0 {
        return Ok(0.0);
    }
    let a2 = q.alpha * q.alpha;
    let r_qq = quantization_covariance_from_parts(g, gram, snr, q);
    let noise = gram * Complex64::new(a2, 0.0) + r_qq;
    let chol = hermitian_cholesky(noise, "effective noise covariance")?;
    // B = L^-1 G, so G^H N^-1 G = B^H B.
    let b = chol
        .l_dirty()
        .solve_lower_triangular(g)
        .ok_or_else(|| Error::Singular("triangular solve in MI".into()))?;
    let n_u = g.ncols();
    let m = ComplexMatrix::identity(n_u, n_u) + b.adjoint() * &b * Complex64::new(snr * a2, 0.0);
    let mi = hermitian_log_det(m)? / std::f64::consts::LN_2;
    Ok(mi.max(0.0))
}

/// Per-user achievable rates of one analog/digital combiner pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub per_user_rates: Vec<f64>,
    pub sum_rate: f64,
    pub method_label: String,
}

/// Per-user rates `log2(1 + a^2 rho |w_k^H h_k|^2 / eta_k)` with
/// `eta_k = a^2 rho sum_{u != k} |w_k^H h_u|^2 + a^2 |w_k|^2 + w_k^H R_qq w_k`.
///
/// `w_rf` must be semi-unitary; the interference-plus-noise term assumes it.
pub fn per_user_rate(
    w_rf: &ComplexMatrix,
    w_bb: &DigitalCombiner,
    h: &ComplexMatrix,
    snr: f64,
    q: &QuantizerModel,
) -> Result<RateReport> {
    if w_rf.nrows() != h.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "W_RF has {} rows but H has {}",
            w_rf.nrows(),
            h.nrows()
        )));
    }
    let w = &w_bb.w_bb;
    if w.nrows() != w_rf.ncols() || w.ncols() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "W_BB is {}x{}, expected {}x{}",
            w.nrows(),
            w.ncols(),
            w_rf.ncols(),
            h.ncols()
        )));
    }
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!(
            "snr must be nonnegative, got {snr}"
        )));
    }
    let deviation = semi_unitary_deviation(w_rf);
    if deviation > SEMI_UNITARY_TOL {
        return Err(Error::NotSemiUnitary { deviation });
    }
    let h_eq = w_rf.adjoint() * h;
    let gram = w_rf.adjoint() * w_rf;
    let r_qq = quantization_covariance_from_parts(&h_eq, &gram, snr, q);
    let a2 = q.alpha * q.alpha;
    // Row k holds w_k^H h_u for every user u.
    let cross = w.adjoint() * &h_eq;
    let n_u = h.ncols();
    let per_user_rates: Vec<f64> = (0..n_u)
        .map(|k| {
            let wk = w.column(k);
            let signal = a2 * snr * cross[(k, k)].norm_sqr();
            let interference: f64 = (0..n_u)
                .filter(|&u| u != k)
                .map(|u| cross[(k, u)].norm_sqr())
                .sum();
            let quant: f64 = (0..wk.len())
                .map(|i| r_qq[(i, i)].re * wk[i].norm_sqr())
                .sum();
            let eta = a2 * snr * interference + a2 * wk.norm_squared() + quant;
            if signal == 0.0 {
                0.0
            } else {
                (1.0 + signal / eta).log2()
            }
        })
        .collect();
    Ok(RateReport {
        sum_rate: per_user_rates.iter().sum(),
        per_user_rates,
        method_label: w_bb.kind.label().to_string(),
    })
}

/// System parameters for the closed-form expressions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TheoryInputs {
    pub n_antennas: usize,
    pub n_rf: usize,
    pub n_users: usize,
    pub paths_per_user: usize,
    /// Linear SNR.
    pub snr: f64,
    pub quantizer: QuantizerModel,
    /// Common singular value `lambda` of `H^H H` (homogeneous case).
    pub singular_value: f64,
}

impl TheoryInputs {
    /// Inputs with `n_antennas = n_rf`, one path per user and `lambda = 0`;
    /// adjust the remaining fields as needed.
    pub fn new(n_users: usize, n_rf: usize, snr: f64, quantizer: QuantizerModel) -> Self {
        TheoryInputs {
            n_antennas: n_rf,
            n_rf,
            n_users,
            paths_per_user: 1,
            snr,
            quantizer,
            singular_value: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_users == 0 || self.n_rf == 0 || self.n_antennas == 0 || self.paths_per_user == 0 {
            return Err(Error::invalid("all dimensions must be positive"));
        }
        if !(self.n_users <= self.n_rf && self.n_rf <= self.n_antennas) {
            return Err(Error::invalid(format!(
                "need N_u <= N_RF <= N_r, got N_u={}, N_RF={}, N_r={}",
                self.n_users, self.n_rf, self.n_antennas
            )));
        }
        if !(self.snr >= 0.0) {
            return Err(Error::invalid(format!(
                "snr must be nonnegative, got {}",
                self.snr
            )));
        }
        Ok(())
    }
}

/// Optimal MI for homogeneous singular values:
/// `N_u log2(1 + a lambda N_RF / (lambda N_u (1 - a) + N_RF / rho))`.
pub fn theory_optimal_mi(inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    let lambda = inputs.singular_value;
    if !(lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be nonnegative, got {lambda}"
        )));
    }
    if inputs.snr == 0.0 || lambda == 0.0 {
        return Ok(0.0);
    }
    let a = inputs.quantizer.alpha;
    let n_u = inputs.n_users as f64;
    let n_rf = inputs.n_rf as f64;
    let sinr = a * lambda * n_rf / (lambda * n_u * (1.0 - a) + n_rf / inputs.snr);
    Ok(n_u * (1.0 + sinr).log2())
}

/// Result of the one-stage SVD MI bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SvdBound {
    Finite(f64),
    /// Ideal quantization: the one-stage MI grows without bound.
    Unbounded,
}

impl SvdBound {
    pub fn value(&self) -> f64 {
        match self {
            SvdBound::Finite(v) => *v,
            SvdBound::Unbounded => f64::INFINITY,
        }
    }
}

/// `N_u log2(1 + a / (1 - a))`, the ceiling of the one-stage SVD combiner.
pub fn theory_svd_upper_bound(n_users: usize, q: &QuantizerModel) -> SvdBound {
    if q.beta == 0.0 {
        return SvdBound::Unbounded;
    }
    SvdBound::Finite(n_users as f64 * (1.0 + q.alpha / q.beta).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErgodicVariant {
    TwoStage,
    OneStage,
}

/// Closed-form MRC ergodic sum rate of the ARV combiner on beamspace
/// channels, with (`TwoStage`) or without (`OneStage`) the DFT stage.
pub fn theory_ergodic_rate(variant: ErgodicVariant, inputs: &TheoryInputs) -> Result<f64> {
    inputs.validate()?;
    if inputs.paths_per_user > inputs.n_rf {
        return Err(Error::invalid(format!(
            "paths per user ({}) exceeds RF chains ({})",
            inputs.paths_per_user, inputs.n_rf
        )));
    }
    let rho = inputs.snr;
    if rho == 0.0 {
        return Ok(0.0);
    }
    let a = inputs.quantizer.alpha;
    let n_r = inputs.n_antennas as f64;
    let n_rf = inputs.n_rf as f64;
    let n_u = inputs.n_users as f64;
    let l = inputs.paths_per_user as f64;
    let numerator = rho * a * n_r * n_rf * (1.0 + 1.0 / l);
    let quant = match variant {
        ErgodicVariant::TwoStage => 2.0 * rho * (1.0 - a) * n_r,
        ErgodicVariant::OneStage => 2.0 * rho * (1.0 - a) * n_r * n_rf / l,
    };
    let denominator = n_rf + rho * n_r * (n_u - 1.0) + quant;
    Ok(n_u * (1.0 + numerator / denominator).log2())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NoiseKind {
    Auto,
    Cross,
}

/// Mean auto (`2 N_r^2 / N_RF`) or cross (`N_r^2 (N_u - 1) / N_RF`)
/// quantization-noise variance with the DFT stage and MRC.
pub fn theory_quantization_noise(
    kind: NoiseKind,
    n_antennas: usize,
    n_rf: usize,
    n_users: usize,
) -> Result<f64> {
    if n_rf == 0 {
        return Err(Error::invalid("n_rf must be positive"));
    }
    let n_r2 = (n_antennas as f64).powi(2);
    Ok(match kind {
        NoiseKind::Auto => 2.0 * n_r2 / n_rf as f64,
        NoiseKind::Cross => n_r2 * n_users.saturating_sub(1) as f64 / n_rf as f64,
    })
}

/// Dimensions of a beamspace moment experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MomentScenario {
    pub n_antennas: usize,
    pub n_rf: usize,
    pub n_users: usize,
    pub paths_per_user: usize,
}

impl MomentScenario {
    /// `E[|h_b,k|^2] = N_r`.
    pub fn norm2(&self) -> f64 {
        self.n_antennas as f64
    }

    /// `E[|h_b,k|^4] = N_r^2 (1 + L) / L`.
    pub fn norm4(&self) -> f64 {
        let l = self.paths_per_user as f64;
        (self.n_antennas as f64).powi(2) * (1.0 + l) / l
    }

    /// `E[|h_b,k^H h_b,i|^2] = N_r^2 / N_RF` for `k != i`.
    pub fn cross_inner(&self) -> f64 {
        (self.n_antennas as f64).powi(2) / self.n_rf as f64
    }

    pub fn psi_auto(&self) -> f64 {
        2.0 * (self.n_antennas as f64).powi(2) / self.n_rf as f64
    }

    pub fn psi_cross(&self) -> f64 {
        (self.n_antennas as f64).powi(2) * (self.n_users as f64 - 1.0) / self.n_rf as f64
    }

    /// One-stage noise term `N_r^2 (2 / L + (N_u - 1) / N_RF)`.
    pub fn psi_one_stage(&self) -> f64 {
        (self.n_antennas as f64).powi(2)
            * (2.0 / self.paths_per_user as f64 + (self.n_users as f64 - 1.0) / self.n_rf as f64)
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

impl Estimate {
    /// Mean and `stddev / sqrt(n)` (sample stddev with `n - 1`).
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        if n == 0 {
            return Estimate {
                mean: f64::NAN,
                stderr: f64::NAN,
            };
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        if n == 1 {
            return Estimate { mean, stderr: 0.0 };
        }
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        Estimate {
            mean,
            stderr: (var / n as f64).sqrt(),
        }
    }

    /// Number of standard errors between the estimate and `target`.
    pub fn z_score(&self, target: f64) -> f64 {
        (self.mean - target) / self.stderr
    }

    pub fn relative_error(&self, target: f64) -> f64 {
        (self.mean - target).abs() / target.abs()
    }
}

/// Monte Carlo moment estimates over beamspace channel draws.
///
/// Every per-draw value is averaged over users (or user pairs) before the
/// standard error is taken across draws.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimates {
    pub norm2: Estimate,
    pub norm4: Estimate,
    /// `None` for a single user.
    pub cross_inner: Option<Estimate>,
    pub psi_auto: Estimate,
    pub psi_cross: Estimate,
    pub psi_one_stage: Estimate,
    pub n_samples: usize,
}

/// Estimates the beamspace moment identities from `n_samples` virtual channel
/// draws. Sample `i` uses its own substream derived from one `u64` drawn
/// from `rng`, so the result does not depend on the thread count.
pub fn empirical_moments<R: Rng + ?Sized>(
    scenario: &MomentScenario,
    n_samples: usize,
    rng: &mut R,
) -> Result<MomentEstimates> {
    if n_samples < 1000 {
        return Err(Error::invalid(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let s = *scenario;
    if s.n_users == 0 || s.n_rf == 0 || s.paths_per_user == 0 || s.paths_per_user > s.n_rf {
        return Err(Error::invalid(format!("infeasible moment scenario {s:?}")));
    }
    let base = rng.next_u64();
    let dft = dft_matrix(s.n_rf);
    let rows: Vec<[f64; 6]> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let mut sub = ChaCha8Rng::seed_from_u64(derive_seed(base, &[i as u64]));
            let v =
                gen_virtual_channel(s.n_rf, s.n_users, s.paths_per_user, s.n_antennas, &mut sub)?;
            Ok(moment_sample(&v.h_b, &dft))
        })
        .collect::<Result<Vec<_>>>()?;
    let column = |j: usize| Estimate::from_samples(&rows.iter().map(|r| r[j]).collect::<Vec<_>>());
    Ok(MomentEstimates {
        norm2: column(0),
        norm4: column(1),
        cross_inner: (s.n_users > 1).then(|| column(2)),
        psi_auto: column(3),
        psi_cross: column(4),
        psi_one_stage: column(5),
        n_samples,
    })
}

fn moment_sample(h_b: &ComplexMatrix, dft: &ComplexMatrix) -> [f64; 6] {
    let n_u = h_b.ncols();
    let n_rf = h_b.nrows();
    let spread = dft.adjoint() * h_b;
    let pow = |m: &ComplexMatrix| {
        let mut p = vec![vec![0.0; n_u]; n_rf];
        for i in 0..n_rf {
            for k in 0..n_u {
                p[i][k] = m[(i, k)].norm_sqr();
            }
        }
        p
    };
    let p_b = pow(h_b);
    let p_s = pow(&spread);
    let row_total = |p: &Vec<Vec<f64>>, i: usize| p[i].iter().sum::<f64>();

    let mut norm2 = 0.0;
    let mut norm4 = 0.0;
    let mut auto = 0.0;
    let mut cross = 0.0;
    let mut one = 0.0;
    for k in 0..n_u {
        let nk: f64 = (0..n_rf).map(|i| p_b[i][k]).sum();
        norm2 += nk;
        norm4 += nk * nk;
        for i in 0..n_rf {
            auto += p_s[i][k] * p_s[i][k];
            cross += p_s[i][k] * (row_total(&p_s, i) - p_s[i][k]);
            one += p_b[i][k] * row_total(&p_b, i);
        }
    }
    let mut inner = 0.0;
    let mut pairs = 0usize;
    for k in 0..n_u {
        for u in 0..n_u {
            if u != k {
                inner += h_b.column(k).dotc(&h_b.column(u)).norm_sqr();
                pairs += 1;
            }
        }
    }
    let nu = n_u as f64;
    [
        norm2 / nu,
        norm4 / nu,
        if pairs > 0 {
            inner / pairs as f64
        } else {
            f64::NAN
        },
        auto / nu,
        cross / nu,
        one / nu,
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combiner::{digital_combiner, DigitalKind};
    use crate::linalg::complex_gaussian_matrix;
    use crate::quantizer::Bits;

    fn q2() -> QuantizerModel {
        QuantizerModel::new(Bits::Finite(2)).unwrap()
    }

    #[test]
    fn mi_zero_snr_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = complex_gaussian_matrix(8, 2, &mut rng);
        let w = ComplexMatrix::identity(8, 4);
        assert_eq!(mutual_information(&w, &h, 0.0, &q2()).unwrap(), 0.0);
    }

    #[test]
    fn mi_single_user_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = complex_gaussian_matrix(8, 1, &mut rng);
        let hn = h.norm();
        let w = h.unscale(hn);
        let rho = 3.0;
        let mi = mutual_information(&w, &h, rho, &QuantizerModel::ideal()).unwrap();
        assert!((mi - (1.0 + rho * hn * hn).log2()).abs() < 1e-12);
    }

    #[test]
    fn mi_rejects_dimension_mismatch() {
        let h = ComplexMatrix::zeros(8, 2);
        let w = ComplexMatrix::identity(7, 3);
        assert!(mutual_information(&w, &h, 1.0, &q2()).is_err());
    }

    #[test]
    fn mi_nondecreasing_in_resolution() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = complex_gaussian_matrix(16, 3, &mut rng);
        let w = crate::linalg::left_singular_vectors(&complex_gaussian_matrix(16, 6, &mut rng), 6)
            .unwrap();
        let mut last = 0.0;
        for b in 1..=12 {
            let q = QuantizerModel::new(Bits::Finite(b)).unwrap();
            let mi = mutual_information(&w, &h, 5.0, &q).unwrap();
            assert!(mi >= last - 1e-12, "b={b}: {mi} < {last}");
            last = mi;
        }
    }

    #[test]
    fn optimal_mi_examples() {
        let mut t = TheoryInputs::new(2, 4, 1.0, q2());
        t.singular_value = 4.0;
        assert!((theory_optimal_mi(&t).unwrap() - 3.896).abs() < 1e-3);

        let mut ideal = TheoryInputs::new(3, 5, 2.0, QuantizerModel::ideal());
        ideal.singular_value = 7.0;
        let want = 3.0 * (1.0f64 + 7.0 * 2.0).log2();
        assert!((theory_optimal_mi(&ideal).unwrap() - want).abs() < 1e-12);

        t.singular_value = 0.0;
        assert_eq!(theory_optimal_mi(&t).unwrap(), 0.0);
        t.singular_value = -1.0;
        assert!(theory_optimal_mi(&t).is_err());
        let mut z = TheoryInputs::new(2, 4, 0.0, q2());
        z.singular_value = 4.0;
        assert_eq!(theory_optimal_mi(&z).unwrap(), 0.0);
    }

    #[test]
    fn svd_bound_examples() {
        assert_eq!(theory_svd_upper_bound(0, &q2()), SvdBound::Finite(0.0));
        let v = theory_svd_upper_bound(8, &q2()).value();
        assert!((v - 24.71).abs() < 0.01, "{v}");
        assert_eq!(
            theory_svd_upper_bound(8, &QuantizerModel::ideal()),
            SvdBound::Unbounded
        );
    }

    #[test]
    fn ergodic_rate_properties() {
        let mut t = TheoryInputs::new(8, 43, 0.0, q2());
        t.n_antennas = 128;
        t.paths_per_user = 8;
        assert_eq!(
            theory_ergodic_rate(ErgodicVariant::TwoStage, &t).unwrap(),
            0.0
        );
        assert_eq!(
            theory_ergodic_rate(ErgodicVariant::OneStage, &t).unwrap(),
            0.0
        );
        for snr_db in [-10.0, 0.0, 10.0, 20.0] {
            t.snr = crate::db_to_linear(snr_db);
            let two = theory_ergodic_rate(ErgodicVariant::TwoStage, &t).unwrap();
            let one = theory_ergodic_rate(ErgodicVariant::OneStage, &t).unwrap();
            assert!(two >= one);
            let mut ideal = t;
            ideal.quantizer = QuantizerModel::ideal();
            let a = theory_ergodic_rate(ErgodicVariant::TwoStage, &ideal).unwrap();
            let b = theory_ergodic_rate(ErgodicVariant::OneStage, &ideal).unwrap();
            assert_eq!(a, b);
        }
        t.paths_per_user = 44;
        assert!(theory_ergodic_rate(ErgodicVariant::TwoStage, &t).is_err());
    }

    #[test]
    fn quantization_noise_examples() {
        assert_eq!(
            theory_quantization_noise(NoiseKind::Auto, 16, 8, 1).unwrap(),
            64.0
        );
        assert_eq!(
            theory_quantization_noise(NoiseKind::Cross, 16, 8, 1).unwrap(),
            0.0
        );
        assert_eq!(
            theory_quantization_noise(NoiseKind::Cross, 16, 8, 3).unwrap(),
            64.0
        );
        assert!(theory_quantization_noise(NoiseKind::Auto, 16, 0, 3).is_err());
    }

    #[test]
    fn moment_closed_forms() {
        let s = MomentScenario {
            n_antennas: 64,
            n_rf: 16,
            n_users: 4,
            paths_per_user: 8,
        };
        assert_eq!(s.psi_auto(), 512.0);
        assert_eq!(s.psi_cross(), 768.0);
        assert_eq!(s.psi_one_stage(), 1792.0);
        let s = MomentScenario {
            n_antennas: 128,
            n_rf: 16,
            n_users: 4,
            paths_per_user: 8,
        };
        assert_eq!(s.norm4(), 18432.0);
    }

    #[test]
    fn estimate_reduction() {
        let e = Estimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(e.mean, 2.5);
        assert!((e.stderr - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        assert_eq!(Estimate::from_samples(&[3.0]).stderr, 0.0);
    }

    #[test]
    fn empirical_moments_rejects_few_samples() {
        let s = MomentScenario {
            n_antennas: 64,
            n_rf: 16,
            n_users: 4,
            paths_per_user: 8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(empirical_moments(&s, 999, &mut rng).is_err());
    }

    #[test]
    fn rate_zero_snr_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = complex_gaussian_matrix(8, 2, &mut rng);
        let w = ComplexMatrix::identity(8, 4);
        let h_eq = w.adjoint() * &h;
        let d = digital_combiner(DigitalKind::Mrc, &h_eq, &w, 0.0, &q2()).unwrap();
        let r = per_user_rate(&w, &d, &h, 0.0, &q2()).unwrap();
        assert!(r.per_user_rates.iter().all(|&x| x == 0.0));
        assert_eq!(r.sum_rate, 0.0);
    }

    #[test]
    fn rate_single_user_ideal_zf() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h = complex_gaussian_matrix(6, 1, &mut rng);
        let w = ComplexMatrix::identity(6, 3);
        let h_eq = w.adjoint() * &h;
        let rho = 2.0;
        let q = QuantizerModel::ideal();
        let d = digital_combiner(DigitalKind::Zf, &h_eq, &w, rho, &q).unwrap();
        let r = per_user_rate(&w, &d, &h, rho, &q).unwrap();
        let want = (1.0 + rho * h_eq.norm_squared()).log2();
        assert!((r.sum_rate - want).abs() < 1e-12);
    }

    #[test]
    fn rate_requires_semi_unitary_combiner() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = complex_gaussian_matrix(6, 2, &mut rng);
        let w = complex_gaussian_matrix(6, 3, &mut rng);
        let h_eq = w.adjoint() * &h;
        let d = digital_combiner(DigitalKind::Mrc, &h_eq, &w, 1.0, &q2()).unwrap();
        assert!(matches!(
            per_user_rate(&w, &d, &h, 1.0, &q2()),
            Err(Error::NotSemiUnitary { .. })
        ));
    }

    #[test]
    fn rate_rejects_dimension_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let h = complex_gaussian_matrix(6, 2, &mut rng);
        let w = ComplexMatrix::identity(6, 3);
        let bad = DigitalCombiner {
            kind: DigitalKind::Mrc,
            w_bb: ComplexMatrix::zeros(4, 2),
        };
        assert!(matches!(
            per_user_rate(&w, &bad, &h, 1.0, &q2()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn sum_rate_is_sum_of_user_rates() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = complex_gaussian_matrix(10, 3, &mut rng);
        let w = crate::linalg::left_singular_vectors(&h, 5).unwrap();
        let h_eq = w.adjoint() * &h;
        for kind in [DigitalKind::Mrc, DigitalKind::Zf, DigitalKind::Mmse] {
            let d = digital_combiner(kind, &h_eq, &w, 4.0, &q2()).unwrap();
            let r = per_user_rate(&w, &d, &h, 4.0, &q2()).unwrap();
            let s: f64 = r.per_user_rates.iter().sum();
            assert!((r.sum_rate - s).abs() < 1e-12);
            assert_eq!(r.method_label, kind.label());
        }
    }
}
