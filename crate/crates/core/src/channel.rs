//! Channel realizations and array-response-vector primitives.
//!
//! Three channel models are supported: the geometric few-path model of a
//! uniform linear array, i.i.d. Rayleigh fading, and the beamspace (virtual)
//! representation in which each user occupies `L` of the `N_RF` selected beams.
//! Pathloss and power control are folded into the SNR, so channels are
//! generated at unit large-scale gain.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::linalg::{complex_gaussian, complex_gaussian_matrix, ComplexMatrix, ComplexVector};

/// Default antenna spacing in wavelengths (half-wavelength ULA).
pub const DEFAULT_D_OVER_LAMBDA: f64 = 0.5;

/// Array response vector of an `n_antennas`-element ULA at `spatial_angle`.
///
/// Entry `m` is `exp(-j m pi angle) / sqrt(n)`, so the vector has unit norm.
pub fn arv(spatial_angle: f64, n_antennas: usize) -> Result<ComplexVector> {
    if !spatial_angle.is_finite() {
        return Err(Error::invalid(format!(
            "spatial angle must be finite, got {spatial_angle}"
        )));
    }
    if n_antennas == 0 {
        return Err(Error::invalid("arv needs at least one antenna"));
    }
    Ok(arv_unchecked(spatial_angle, n_antennas))
}

pub(crate) fn arv_unchecked(spatial_angle: f64, n: usize) -> ComplexVector {
    let scale = 1.0 / (n as f64).sqrt();
    ComplexVector::from_iterator(
        n,
        (0..n).map(|m| Complex64::from_polar(scale, -(m as f64) * PI * spatial_angle)),
    )
}

/// Spatial angle `(2d/lambda) sin(phi)` of a physical angle of arrival.
pub fn spatial_angle(physical_aoa: f64, d_over_lambda: f64) -> f64 {
    2.0 * d_over_lambda * physical_aoa.sin()
}

/// One propagation path of a user.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    /// Physical angle of arrival in radians, within `[-pi/2, pi/2]`.
    pub physical_aoa: f64,
    pub spatial_angle: f64,
}

impl PathParams {
    pub fn new(gain: Complex64, physical_aoa: f64, d_over_lambda: f64) -> Self {
        PathParams {
            gain,
            physical_aoa,
            spatial_angle: spatial_angle(physical_aoa, d_over_lambda),
        }
    }
}

/// Channel matrix `H` (`N_r x N_u`) plus the path parameters that generated it.
///
/// `paths` is empty for Rayleigh channels.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub h: ComplexMatrix,
    pub paths: Vec<Vec<PathParams>>,
}

impl ChannelRealization {
    /// Builds the geometric channel: column `k` is
    /// `sqrt(N_r / L_k) * sum_l g_lk a(phi_lk)`.
    pub fn from_paths(n_antennas: usize, paths: Vec<Vec<PathParams>>) -> Result<Self> {
        if n_antennas == 0 || paths.is_empty() {
            return Err(Error::invalid("need at least one antenna and one user"));
        }
        let mut h = ComplexMatrix::zeros(n_antennas, paths.len());
        for (k, user) in paths.iter().enumerate() {
            if user.is_empty() {
                return Err(Error::invalid(format!("user {k} has no paths")));
            }
            let scale = (n_antennas as f64 / user.len() as f64).sqrt();
            let mut col = ComplexVector::zeros(n_antennas);
            for p in user {
                col += arv(p.spatial_angle, n_antennas)? * p.gain;
            }
            h.set_column(k, &(col * Complex64::new(scale, 0.0)));
        }
        Ok(ChannelRealization { h, paths })
    }

    pub fn n_antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn n_users(&self) -> usize {
        self.h.ncols()
    }

    /// Path counts `L_k` per user (empty for Rayleigh channels).
    pub fn path_counts(&self) -> Vec<usize> {
        self.paths.iter().map(Vec::len).collect()
    }
}

/// Beamspace channel `H_b` (`N_RF x N_u`) with `L` nonzero entries per column.
#[derive(Debug, Clone, PartialEq)]
pub struct VirtualChannelRealization {
    pub h_b: ComplexMatrix,
    /// Sorted nonzero row indices of each column.
    pub support_sets: Vec<Vec<usize>>,
    pub n_antennas: usize,
}

impl VirtualChannelRealization {
    pub fn paths_per_user(&self) -> usize {
        self.support_sets.first().map_or(0, Vec::len)
    }
}

/// Draws `max(1, Poisson(mean_paths))`.
pub fn draw_path_count<R: Rng + ?Sized>(mean_paths: f64, rng: &mut R) -> Result<usize> {
    if !(mean_paths > 0.0) || !mean_paths.is_finite() {
        return Err(Error::invalid(format!(
            "mean path count must be positive and finite, got {mean_paths}"
        )));
    }
    let poisson = Poisson::new(mean_paths)
        .map_err(|e| Error::invalid(format!("poisson({mean_paths}): {e}")))?;
    let draw: f64 = poisson.sample(rng);
    Ok((draw as usize).max(1))
}

fn check_dims(n_antennas: usize, n_users: usize) -> Result<()> {
    if n_antennas == 0 || n_users == 0 {
        return Err(Error::invalid(format!(
            "need n_antennas >= 1 and n_users >= 1, got {n_antennas} and {n_users}"
        )));
    }
    Ok(())
}

/// Geometric few-path channel with Poisson path counts, unit complex Gaussian
/// gains and angles of arrival uniform on `[-pi/2, pi/2]`.
///
/// Per user the draw order is: path count, then (gain, angle) per path.
pub fn gen_geometric_channel<R: Rng + ?Sized>(
    n_antennas: usize,
    n_users: usize,
    mean_paths: f64,
    d_over_lambda: f64,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_dims(n_antennas, n_users)?;
    if !(d_over_lambda > 0.0) || !d_over_lambda.is_finite() {
        return Err(Error::invalid(format!(
            "antenna spacing must be positive, got {d_over_lambda}"
        )));
    }
    let mut paths = Vec::with_capacity(n_users);
    for _ in 0..n_users {
        let l = draw_path_count(mean_paths, rng)?;
        let user = (0..l)
            .map(|_| {
                let gain = complex_gaussian(rng);
                let aoa = rng.random_range(-FRAC_PI_2..=FRAC_PI_2);
                PathParams::new(gain, aoa, d_over_lambda)
            })
            .collect();
        paths.push(user);
    }
    ChannelRealization::from_paths(n_antennas, paths)
}

/// I.i.d. unit complex Gaussian channel.
pub fn gen_rayleigh_channel<R: Rng + ?Sized>(
    n_antennas: usize,
    n_users: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    check_dims(n_antennas, n_users)?;
    Ok(ChannelRealization {
        h: complex_gaussian_matrix(n_antennas, n_users, rng),
        paths: Vec::new(),
    })
}

/// Beamspace channel: each column has a uniformly random `L`-subset of the
/// `n_rf` beams, with entries `sqrt(N_r / L) * xi`, `xi ~ CN(0, 1)`.
pub fn gen_virtual_channel<R: Rng + ?Sized>(
    n_rf: usize,
    n_users: usize,
    paths_per_user: usize,
    n_antennas: usize,
    rng: &mut R,
) -> Result<VirtualChannelRealization> {
    check_dims(n_antennas, n_users)?;
    if n_rf == 0 || paths_per_user == 0 {
        return Err(Error::invalid("n_rf and paths_per_user must be positive"));
    }
    if paths_per_user > n_rf {
        return Err(Error::invalid(format!(
            "paths per user ({paths_per_user}) exceeds RF chains ({n_rf})"
        )));
    }
    let scale = (n_antennas as f64 / paths_per_user as f64).sqrt();
    let mut h_b = ComplexMatrix::zeros(n_rf, n_users);
    let mut support_sets = Vec::with_capacity(n_users);
    for k in 0..n_users {
        let mut support = index::sample(rng, n_rf, paths_per_user).into_vec();
        support.sort_unstable();
        for &i in &support {
            h_b[(i, k)] = complex_gaussian(rng) * scale;
        }
        support_sets.push(support);
    }
    Ok(VirtualChannelRealization {
        h_b,
        support_sets,
        n_antennas,
    })
}
