//! Analog and digital combiners.
//!
//! Analog combiners are returned as an [`AnalogCombinerPair`] holding the
//! first stage (`N_r x N_RF`), the second stage (`N_RF x N_RF`) and their
//! product. Digital combiners act on the equivalent channel
//! `H_eq = W_RF^H H`.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{arv_unchecked, ChannelRealization};
use crate::error::{Error, Result};
use crate::linalg::{
    complex_gaussian_matrix, extend_orthonormal, from_columns, hermitian_cholesky,
    left_singular_vectors, orthonormal_columns, ComplexMatrix, ComplexVector,
};
use crate::quantizer::{quantization_covariance_from_parts, QuantizerModel};

/// Relative margin a candidate must beat the incumbent by to win an argmax.
/// Keeps ties (up to rounding) on the lowest index.
const ARGMAX_REL_TOL: f64 = 1e-12;

/// Residual channel energy, relative to `|H|_F^2`, below which the greedy
/// projection is considered exhausted.
const EXHAUSTED_REL_TOL: f64 = 1e-12;

/// Uniform grid of spatial angles `2n/|V| - 1`, `n = 1..|V|`.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    spatial_angles: Vec<f64>,
}

impl Codebook {
    pub fn new(size: usize) -> Result<Self> {
        if size == 0 {
            return Err(Error::invalid("codebook size must be positive"));
        }
        let v = size as f64;
        Ok(Codebook {
            spatial_angles: (1..=size).map(|n| 2.0 * n as f64 / v - 1.0).collect(),
        })
    }

    pub fn spatial_angles(&self) -> &[f64] {
        &self.spatial_angles
    }

    pub fn len(&self) -> usize {
        self.spatial_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spatial_angles.is_empty()
    }

    /// `N_r x |V|` matrix whose column `n` is the ARV at angle `n`.
    pub fn arv_matrix(&self, n_antennas: usize) -> ComplexMatrix {
        let cols: Vec<ComplexVector> = self
            .spatial_angles
            .iter()
            .map(|&t| arv_unchecked(t, n_antennas))
            .collect();
        from_columns(n_antennas, &cols)
    }
}

pub fn build_codebook(size: usize) -> Result<Codebook> {
    Codebook::new(size)
}

/// Normalized DFT matrix with entry `(m, k) = exp(-j 2 pi m k / n) / sqrt(n)`.
///
/// # Panics
/// If `n == 0`.
pub fn dft_matrix(n: usize) -> ComplexMatrix {
    assert!(n > 0, "DFT size must be positive");
    let scale = 1.0 / (n as f64).sqrt();
    ComplexMatrix::from_fn(n, n, |m, k| {
        // Reduce mk mod n first so large sizes keep full phase accuracy.
        let phase = -2.0 * std::f64::consts::PI * ((m * k) % n) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// A two-stage analog combiner `W_RF = W_RF1 W_RF2`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalogCombinerPair {
    pub first: ComplexMatrix,
    pub second: ComplexMatrix,
    pub product: ComplexMatrix,
}

impl AnalogCombinerPair {
    pub fn new(first: ComplexMatrix, second: ComplexMatrix) -> Result<Self> {
        if first.ncols() != second.nrows() || !second.is_square() {
            return Err(Error::DimensionMismatch(format!(
                "first stage is {}x{}, second stage is {}x{}",
                first.nrows(),
                first.ncols(),
                second.nrows(),
                second.ncols()
            )));
        }
        let product = &first * &second;
        Ok(AnalogCombinerPair {
            first,
            second,
            product,
        })
    }

    /// First stage followed by the `N_RF`-point DFT.
    pub fn with_dft(first: ComplexMatrix) -> Self {
        let n = first.ncols();
        Self::new(first, dft_matrix(n)).expect("square second stage")
    }

    /// One-stage combiner (`W_RF2 = I`).
    pub fn one_stage(first: ComplexMatrix) -> Self {
        let n = first.ncols();
        Self::new(first, ComplexMatrix::identity(n, n)).expect("square second stage")
    }

    pub fn n_rf(&self) -> usize {
        self.product.ncols()
    }
}

/// Codebook indices chosen by the projection-based greedy search.
#[derive(Debug, Clone, PartialEq)]
pub struct ArvSelection {
    /// Codebook indices in selection order.
    pub indices: Vec<usize>,
    /// `|a^H H_rm|` for each chosen ARV right after its projection step.
    pub residual_norms: Vec<f64>,
    /// True when the channel energy was exhausted and the tail of `indices`
    /// was filled in codebook order.
    pub exhausted: bool,
}

fn check_selection_args(h: &ComplexMatrix, n_rf: usize, codebook: &Codebook) -> Result<()> {
    if n_rf == 0 {
        return Err(Error::invalid("n_rf must be positive"));
    }
    if n_rf > codebook.len() {
        return Err(Error::invalid(format!(
            "n_rf = {n_rf} exceeds the codebook size {}",
            codebook.len()
        )));
    }
    if n_rf > h.nrows() {
        return Err(Error::invalid(format!(
            "n_rf = {n_rf} exceeds the antenna count {}",
            h.nrows()
        )));
    }
    Ok(())
}

/// Greedy maximum-gain ARV selection with projection of the residual channel.
///
/// Each step picks the remaining angle maximizing `|a^H H_rm|^2`, projects
/// `H_rm <- (I - a a^H) H_rm` and drops the angle from the codebook.
pub fn arv_tsac_select(
    h: &ComplexMatrix,
    n_rf: usize,
    codebook: &Codebook,
) -> Result<ArvSelection> {
    check_selection_args(h, n_rf, codebook)?;
    let a = codebook.arv_matrix(h.nrows());
    let total = h.norm_squared();
    let mut h_rm = h.clone();
    // corr row n holds a_n^H H_rm; updated in place after each projection.
    let mut corr = a.adjoint() * h;
    let mut remaining = vec![true; codebook.len()];
    let mut indices = Vec::with_capacity(n_rf);
    let mut residual_norms = Vec::with_capacity(n_rf);
    let mut exhausted = false;

    while indices.len() < n_rf {
        let mut best: Option<(usize, f64)> = None;
        for n in (0..codebook.len()).filter(|&n| remaining[n]) {
            let gain = corr.row(n).norm_squared();
            match best {
                Some((_, g)) if gain <= g * (1.0 + ARGMAX_REL_TOL) => {}
                _ => best = Some((n, gain)),
            }
        }
        let (star, gain) = best.expect("codebook has remaining angles");
        if !(gain >= EXHAUSTED_REL_TOL * total) || total == 0.0 {
            exhausted = true;
            for (n, free) in remaining.iter_mut().enumerate() {
                if indices.len() == n_rf {
                    break;
                }
                if *free {
                    *free = false;
                    indices.push(n);
                    residual_norms.push((a.column(n).adjoint() * &h_rm).norm());
                }
            }
            break;
        }
        let a_star = a.column(star).into_owned();
        let c = corr.row(star).into_owned();
        h_rm -= &a_star * &c;
        let overlap = a.adjoint() * &a_star;
        corr -= overlap * c;
        remaining[star] = false;
        indices.push(star);
        residual_norms.push((a_star.adjoint() * &h_rm).norm());
    }
    Ok(ArvSelection {
        indices,
        residual_norms,
        exhausted,
    })
}

/// ARV-TSAC: greedy ARV first stage followed by the DFT second stage.
pub fn arv_tsac(h: &ComplexMatrix, n_rf: usize, codebook: &Codebook) -> Result<AnalogCombinerPair> {
    let sel = arv_tsac_select(h, n_rf, codebook)?;
    Ok(AnalogCombinerPair::with_dft(selected_arvs(
        h.nrows(),
        codebook,
        &sel.indices,
    )))
}

/// ARVs of the given codebook indices, stacked as columns.
pub fn selected_arvs(n_antennas: usize, codebook: &Codebook, indices: &[usize]) -> ComplexMatrix {
    let angles = codebook.spatial_angles();
    let cols: Vec<ComplexVector> = indices
        .iter()
        .map(|&i| arv_unchecked(angles[i], n_antennas))
        .collect();
    from_columns(n_antennas, &cols)
}

/// First `n_rf` left-singular vectors of `h`, optionally followed by the DFT.
pub fn svd_combiner(
    h: &ComplexMatrix,
    n_rf: usize,
    with_dft_stage: bool,
) -> Result<AnalogCombinerPair> {
    if n_rf == 0 {
        return Err(Error::invalid("n_rf must be positive"));
    }
    if n_rf > h.nrows() {
        return Err(Error::invalid(format!(
            "n_rf = {n_rf} exceeds the antenna count {}",
            h.nrows()
        )));
    }
    let u = left_singular_vectors(h, n_rf)?;
    Ok(if with_dft_stage {
        AnalogCombinerPair::with_dft(u)
    } else {
        AnalogCombinerPair::one_stage(u)
    })
}

/// AoA-matched first stage `[A_AoA | A_perp]` followed by the DFT.
///
/// Requires `sum_k L_k <= n_rf`. The complement `A_perp` is built from random
/// Gaussian directions, so `rng` is consumed.
pub fn aoa_combiner<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    n_rf: usize,
    rng: &mut R,
) -> Result<AnalogCombinerPair> {
    let angles: Vec<f64> = chan
        .paths
        .iter()
        .flatten()
        .map(|p| p.spatial_angle)
        .collect();
    if angles.is_empty() {
        return Err(Error::invalid("channel carries no path parameters"));
    }
    if angles.len() > n_rf {
        return Err(Error::TooManyPaths {
            required: angles.len(),
            available: n_rf,
        });
    }
    aoa_combiner_from_angles(chan.n_antennas(), &angles, n_rf, rng)
}

/// [`aoa_combiner`] restricted to the `n_rf` strongest paths when the channel
/// has more paths than RF chains.
pub fn aoa_combiner_strongest<R: Rng + ?Sized>(
    chan: &ChannelRealization,
    n_rf: usize,
    rng: &mut R,
) -> Result<AnalogCombinerPair> {
    let angles = strongest_path_angles(chan, n_rf);
    if angles.is_empty() {
        return Err(Error::invalid("channel carries no path parameters"));
    }
    aoa_combiner_from_angles(chan.n_antennas(), &angles, n_rf, rng)
}

/// Spatial angles of at most `budget` paths, strongest gain first.
///
/// Every user keeps its strongest path when `budget >= N_u`; remaining slots
/// go to the strongest leftover paths across users.
pub fn strongest_path_angles(chan: &ChannelRealization, budget: usize) -> Vec<f64> {
    let mut firsts = Vec::new();
    let mut rest = Vec::new();
    for user in &chan.paths {
        let mut order: Vec<usize> = (0..user.len()).collect();
        order.sort_by(|&a, &b| user[b].gain.norm().total_cmp(&user[a].gain.norm()));
        for (rank, &i) in order.iter().enumerate() {
            let p = &user[i];
            if rank == 0 {
                firsts.push((p.gain.norm(), p.spatial_angle));
            } else {
                rest.push((p.gain.norm(), p.spatial_angle));
            }
        }
    }
    let by_gain = |a: &(f64, f64), b: &(f64, f64)| b.0.total_cmp(&a.0);
    firsts.sort_by(by_gain);
    rest.sort_by(by_gain);
    firsts
        .into_iter()
        .chain(rest)
        .take(budget)
        .map(|(_, t)| t)
        .collect()
}

/// AoA combiner for an explicit list of path angles.
pub fn aoa_combiner_from_angles<R: Rng + ?Sized>(
    n_antennas: usize,
    spatial_angles: &[f64],
    n_rf: usize,
    rng: &mut R,
) -> Result<AnalogCombinerPair> {
    if n_rf > n_antennas {
        return Err(Error::invalid(format!(
            "n_rf = {n_rf} exceeds the antenna count {n_antennas}"
        )));
    }
    if spatial_angles.len() > n_rf {
        return Err(Error::TooManyPaths {
            required: spatial_angles.len(),
            available: n_rf,
        });
    }
    let a_cols: Vec<ComplexVector> = spatial_angles
        .iter()
        .map(|&t| arv_unchecked(t, n_antennas))
        .collect();
    let a_aoa = from_columns(n_antennas, &a_cols);
    let span = orthonormal_columns(&a_aoa)?;
    let mut draws = 0usize;
    let candidates = std::iter::from_fn(|| {
        // A Gaussian draw is dependent on the span with probability zero;
        // the cap only guards against a pathological generator.
        if draws >= 4 * n_rf + 16 {
            return None;
        }
        draws += 1;
        Some(
            complex_gaussian_matrix(n_antennas, 1, rng)
                .column(0)
                .into_owned(),
        )
    });
    let complement = extend_orthonormal(&span, n_rf, candidates)?;
    let mut cols = a_cols;
    cols.extend(complement);
    Ok(AnalogCombinerPair::with_dft(from_columns(
        n_antennas, &cols,
    )))
}

/// Codebook indices chosen by greedy MI maximization.
#[derive(Debug, Clone, PartialEq)]
pub struct GreedySelection {
    pub indices: Vec<usize>,
    /// MI of the partial combiner after each selection.
    pub mi_trace: Vec<f64>,
}

/// Greedy MI search: each step appends the codebook ARV that maximizes the
/// MI of the one-stage combiner built so far. No projection is applied.
///
/// Candidates are scored with a bordered Cholesky update of the effective
/// noise covariance, so one step costs `O(|V| k^2)` instead of a full MI
/// evaluation per candidate.
pub fn greedy_mi_select(
    h: &ComplexMatrix,
    n_rf: usize,
    codebook: &Codebook,
    snr: f64,
    q: &QuantizerModel,
) -> Result<GreedySelection> {
    check_selection_args(h, n_rf, codebook)?;
    if !(snr >= 0.0) {
        return Err(Error::invalid(format!(
            "snr must be nonnegative, got {snr}"
        )));
    }
    let a = codebook.arv_matrix(h.nrows());
    let corr = a.adjoint() * h;
    let cross = a.adjoint() * &a;
    let n_u = h.ncols();
    let a2 = q.alpha * q.alpha;
    let ab = q.alpha * q.beta;
    let gain = snr * a2;
    // Diagonal of a^2 W^H W + R_qq for a single candidate column.
    let noise_diag: Vec<f64> = (0..codebook.len())
        .map(|n| {
            let g = cross[(n, n)].re;
            a2 * g + ab * (snr * corr.row(n).norm_squared() + g)
        })
        .collect();

    let mut remaining = vec![true; codebook.len()];
    let mut indices: Vec<usize> = Vec::with_capacity(n_rf);
    let mut mi_trace = Vec::with_capacity(n_rf);
    let mut mi_nats = 0.0;

    for step in 0..n_rf {
        // Factor the noise covariance N_S of the current selection and form
        // B_S = L_S^-1 G_S and M_S = I + rho a^2 B_S^H B_S.
        let noise = ComplexMatrix::from_fn(step, step, |r, c| {
            if r == c {
                Complex64::new(noise_diag[indices[r]], 0.0)
            } else {
                cross[(indices[r], indices[c])] * a2
            }
        });
        let l_s = hermitian_cholesky(noise, "greedy noise covariance")?.unpack();
        let g_s = ComplexMatrix::from_fn(step, n_u, |r, c| corr[(indices[r], c)]);
        let b_s = l_s
            .solve_lower_triangular(&g_s)
            .ok_or_else(|| Error::Singular("greedy triangular solve".into()))?;
        let m_s =
            ComplexMatrix::identity(n_u, n_u) + b_s.adjoint() * &b_s * Complex64::new(gain, 0.0);
        let m_chol = hermitian_cholesky(m_s, "greedy MI matrix")?;

        let mut best: Option<(usize, f64)> = None;
        for n in (0..codebook.len()).filter(|&n| remaining[n]) {
            let border =
                ComplexVector::from_iterator(step, indices.iter().map(|&i| cross[(i, n)] * a2));
            let l = l_s
                .solve_lower_triangular(&border)
                .ok_or_else(|| Error::Singular("greedy border solve".into()))?;
            let d2 = noise_diag[n] - l.norm_squared();
            let score = if gain == 0.0 || d2 <= 1e-14 * noise_diag[n] {
                // A candidate inside the span of the selection adds nothing.
                0.0
            } else {
                // New row of B: (g_n - l^H B_S) / d, a rank-one update of M_S.
                let mut b_n = corr.row(n).transpose();
                if step > 0 {
                    b_n -= (l.adjoint() * &b_s).transpose();
                }
                let b_n = b_n.unscale(d2.sqrt()).conjugate();
                let quad = b_n.dotc(&m_chol.solve(&b_n)).re.max(0.0);
                (gain * quad).ln_1p()
            };
            match best {
                Some((_, s)) if score <= s + ARGMAX_REL_TOL * s.abs() => {}
                _ => best = Some((n, score)),
            }
        }
        let (star, score) = best.expect("codebook has remaining angles");
        remaining[star] = false;
        indices.push(star);
        mi_nats += score;
        mi_trace.push(mi_nats / std::f64::consts::LN_2);
    }
    Ok(GreedySelection { indices, mi_trace })
}

/// Greedy-MI one-stage baseline (`W_RF2 = I`).
pub fn greedy_mi(
    h: &ComplexMatrix,
    n_rf: usize,
    codebook: &Codebook,
    snr: f64,
    q: &QuantizerModel,
) -> Result<AnalogCombinerPair> {
    let sel = greedy_mi_select(h, n_rf, codebook, snr, q)?;
    Ok(AnalogCombinerPair::one_stage(selected_arvs(
        h.nrows(),
        codebook,
        &sel.indices,
    )))
}

/// Digital combiner family.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum DigitalKind {
    Mrc,
    Zf,
    Mmse,
}

impl DigitalKind {
    pub fn label(&self) -> &'static str {
        match self {
            DigitalKind::Mrc => "MRC",
            DigitalKind::Zf => "ZF",
            DigitalKind::Mmse => "MMSE",
        }
    }
}

impl fmt::Display for DigitalKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for DigitalKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "MRC" => Ok(DigitalKind::Mrc),
            "ZF" => Ok(DigitalKind::Zf),
            "MMSE" => Ok(DigitalKind::Mmse),
            _ => Err(Error::invalid(format!("unknown digital combiner '{s}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DigitalCombiner {
    pub kind: DigitalKind,
    /// `N_RF x N_u` baseband combiner.
    pub w_bb: ComplexMatrix,
}

/// Relative singular-value floor below which ZF treats `H_eq` as rank deficient.
const ZF_RANK_TOL: f64 = 1e-10;

/// Builds the MRC, ZF or MMSE baseband combiner for `H_eq = W_RF^H H`.
pub fn digital_combiner(
    kind: DigitalKind,
    h_eq: &ComplexMatrix,
    w_rf: &ComplexMatrix,
    snr: f64,
    q: &QuantizerModel,
) -> Result<DigitalCombiner> {
    if h_eq.nrows() != w_rf.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "H_eq has {} rows but W_RF has {} columns",
            h_eq.nrows(),
            w_rf.ncols()
        )));
    }
    let w_bb = match kind {
        DigitalKind::Mrc => h_eq.clone(),
        DigitalKind::Zf => {
            if h_eq.ncols() > h_eq.nrows() {
                return Err(Error::Singular(format!(
                    "ZF needs full column rank but H_eq is {}x{}",
                    h_eq.nrows(),
                    h_eq.ncols()
                )));
            }
            let sv = h_eq.singular_values();
            let smax = sv.max();
            let smin = sv.min();
            if !(smin > ZF_RANK_TOL * smax) {
                return Err(Error::Singular(format!(
                    "H_eq is rank deficient (singular values {smin:.3e} / {smax:.3e})"
                )));
            }
            let gram = h_eq.adjoint() * h_eq;
            let chol = hermitian_cholesky(gram, "H_eq^H H_eq")
                .map_err(|e| Error::Singular(e.to_string()))?;
            // W_BB = H_eq (H_eq^H H_eq)^-1 = ((H_eq^H H_eq)^-1 H_eq^H)^H
            chol.solve(&h_eq.adjoint()).adjoint()
        }
        DigitalKind::Mmse => {
            if !(snr >= 0.0) {
                return Err(Error::invalid(format!(
                    "snr must be nonnegative, got {snr}"
                )));
            }
            let a = q.alpha;
            let gram = w_rf.adjoint() * w_rf;
            let r_qq = quantization_covariance_from_parts(h_eq, &gram, snr, q);
            let r = h_eq * h_eq.adjoint() * Complex64::new(a * a * snr, 0.0)
                + &gram * Complex64::new(a * a, 0.0)
                + r_qq;
            let chol = hermitian_cholesky(r, "MMSE output covariance")?;
            chol.solve(&(h_eq * Complex64::new(a * snr, 0.0)))
        }
    };
    Ok(DigitalCombiner { kind, w_bb })
}
