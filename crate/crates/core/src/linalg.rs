//! Dense complex linear-algebra helpers shared by the combiners and metrics.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Dense complex matrix; carrier for channels and combiners.
pub type ComplexMatrix = DMatrix<Complex64>;

/// Dense complex column vector.
pub type ComplexVector = DVector<Complex64>;

/// Residual norm below which a Gram-Schmidt candidate is treated as dependent.
const DEPENDENT_TOL: f64 = 1e-8;

/// Fails unless every entry is finite.
pub fn ensure_finite(m: &ComplexMatrix, what: &str) -> Result<()> {
    if m.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::invalid(format!("{what} has non-finite entries")))
    }
}

/// Draws one unit-variance circularly symmetric complex Gaussian sample.
///
/// Real and imaginary parts are each N(0, 1/2).
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows x cols` matrix of i.i.d. unit complex Gaussians, filled column-major.
pub fn complex_gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    rng: &mut R,
) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols);
    for c in 0..cols {
        for r in 0..rows {
            m[(r, c)] = complex_gaussian(rng);
        }
    }
    m
}

/// Largest entrywise deviation of `W^H W` from the identity.
pub fn semi_unitary_deviation(w: &ComplexMatrix) -> f64 {
    let gram = w.adjoint() * w;
    let mut worst = 0.0f64;
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((gram[(r, c)] - target).norm());
        }
    }
    worst
}

/// Cholesky factorization of a Hermitian positive-definite matrix.
///
/// nalgebra takes complex square roots of the pivots and so never fails on
/// complex input; a pivot that is not real and positive is reported here.
pub fn hermitian_cholesky(m: ComplexMatrix, what: &str) -> Result<Cholesky<Complex64, Dyn>> {
    let n = m.nrows();
    let chol = m
        .cholesky()
        .ok_or_else(|| Error::NotPositiveDefinite(format!("{what} ({n}x{n})")))?;
    let l = chol.l_dirty();
    for i in 0..n {
        let d = l[(i, i)];
        if !(d.re > 0.0 && d.im.abs() <= 1e-8 * d.re) {
            return Err(Error::NotPositiveDefinite(format!(
                "{what} ({n}x{n}): pivot {i} is {d}"
            )));
        }
    }
    Ok(chol)
}

/// Natural log-determinant of a Hermitian positive-definite matrix via Cholesky.
pub fn hermitian_log_det(m: ComplexMatrix) -> Result<f64> {
    let n = m.nrows();
    let chol = hermitian_cholesky(m, "log-determinant argument")?;
    let l = chol.l_dirty();
    Ok((0..n).map(|i| 2.0 * l[(i, i)].re.ln()).sum())
}

/// Rotates `v` so that its largest-magnitude entry is real and positive.
///
/// Ties go to the lowest index.
pub fn normalize_phase(v: &mut ComplexVector) {
    let mut best = 0;
    let mut best_mag = -1.0;
    for (i, z) in v.iter().enumerate() {
        let mag = z.norm();
        if mag > best_mag * (1.0 + 1e-12) {
            best = i;
            best_mag = mag;
        }
    }
    if best_mag > 0.0 {
        let rot = v[best].conj() / best_mag;
        v.iter_mut().for_each(|z| *z *= rot);
    }
}

/// Orthogonalizes `v` against the columns of `basis` (two passes of modified
/// Gram-Schmidt) and returns the residual.
pub fn orthogonalize_against(basis: &[ComplexVector], mut v: ComplexVector) -> ComplexVector {
    for _ in 0..2 {
        for q in basis {
            let coeff = q.dotc(&v);
            v.axpy(-coeff, q, Complex64::new(1.0, 0.0));
        }
    }
    v
}

/// Appends orthonormal vectors drawn from `candidates` to `basis` until it has
/// `target` columns. Candidates whose residual against the current basis is
/// negligible are skipped. Returns only the appended vectors.
pub fn extend_orthonormal<I>(
    basis: &[ComplexVector],
    target: usize,
    candidates: I,
) -> Result<Vec<ComplexVector>>
where
    I: IntoIterator<Item = ComplexVector>,
{
    let mut all: Vec<ComplexVector> = basis.to_vec();
    let mut added = Vec::new();
    for cand in candidates {
        if all.len() >= target {
            break;
        }
        let scale = cand.norm();
        if scale == 0.0 {
            continue;
        }
        let resid = orthogonalize_against(&all, cand.unscale(scale));
        let norm = resid.norm();
        if norm > DEPENDENT_TOL {
            let q = resid.unscale(norm);
            all.push(q.clone());
            added.push(q);
        }
    }
    if all.len() < target {
        return Err(Error::invalid(format!(
            "could not complete an orthonormal basis to {target} vectors (got {})",
            all.len()
        )));
    }
    Ok(added)
}

/// Orthonormalizes the columns of `m` in order (dependent columns are an error).
pub fn orthonormal_columns(m: &ComplexMatrix) -> Result<Vec<ComplexVector>> {
    let mut out: Vec<ComplexVector> = Vec::with_capacity(m.ncols());
    for c in 0..m.ncols() {
        let col = m.column(c).into_owned();
        let resid = orthogonalize_against(&out, col);
        let norm = resid.norm();
        if norm <= DEPENDENT_TOL {
            return Err(Error::Singular(format!("column {c} is linearly dependent")));
        }
        out.push(resid.unscale(norm));
    }
    Ok(out)
}

/// Stacks column vectors into a matrix with `rows` rows.
pub fn from_columns(rows: usize, cols: &[ComplexVector]) -> ComplexMatrix {
    let mut m = ComplexMatrix::zeros(rows, cols.len());
    for (c, v) in cols.iter().enumerate() {
        m.set_column(c, v);
    }
    m
}

/// The first `n` left-singular vectors of `h`, ordered by decreasing singular
/// value, each phase-normalized with [`normalize_phase`].
///
/// When `n` exceeds the rank of the thin SVD the set is completed with an
/// orthonormal basis of the left null space, built by Gram-Schmidt over the
/// canonical basis vectors in index order.
pub fn left_singular_vectors(h: &ComplexMatrix, n: usize) -> Result<ComplexMatrix> {
    let rows = h.nrows();
    if n > rows {
        return Err(Error::invalid(format!(
            "requested {n} left-singular vectors of a matrix with {rows} rows"
        )));
    }
    let svd = h.clone().svd(true, false);
    let u = svd
        .u
        .ok_or_else(|| Error::Singular("SVD did not return left-singular vectors".into()))?;
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    // Only directions with non-negligible singular values are determined by h.
    let mut cols: Vec<ComplexVector> = order
        .iter()
        .filter(|&&i| svd.singular_values[i] > smax * 1e-12 && smax > 0.0)
        .take(n)
        .map(|&i| {
            let mut v = u.column(i).into_owned();
            normalize_phase(&mut v);
            v
        })
        .collect();
    if cols.len() < n {
        let canonical = (0..rows).map(|i| {
            let mut e = ComplexVector::zeros(rows);
            e[i] = Complex64::new(1.0, 0.0);
            e
        });
        let extra = extend_orthonormal(&cols, n, canonical)?;
        for mut v in extra {
            normalize_phase(&mut v);
            cols.push(v);
        }
    }
    Ok(from_columns(rows, &cols))
}
