//! Dense complex linear algebra helpers on top of nalgebra's SVD and
//! Hermitian eigensolver.

use crate::forms::C64;
use nalgebra::{DMatrix, DVector};

pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

/// Default absolute threshold below which singular values count as zero.
pub const RANK_THRESHOLD: f64 = 1e-9;

/// Full singular value decomposition `m = U diag(s) V^H` with `V` square.
///
/// Wide matrices are padded with zero rows so that `V` spans the whole source space.
pub struct FullSvd {
    pub u: CMat,
    pub sigma: Vec<f64>,
    pub v: CMat,
}

pub fn full_svd(m: &CMat) -> FullSvd {
    let (r, c) = m.shape();
    if r == 0 || c == 0 {
        return FullSvd { u: CMat::identity(r, r), sigma: Vec::new(), v: CMat::identity(c, c) };
    }
    if r > 2 * c {
        // tall: QR first, then the SVD of the small triangular factor
        let qr = m.clone().qr();
        let inner = full_svd(&qr.r());
        return FullSvd { u: qr.q() * inner.u, sigma: inner.sigma, v: inner.v };
    }
    let padded = if r < c {
        let mut p = CMat::zeros(c, c);
        p.view_mut((0, 0), (r, c)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let svd = padded.svd(true, true);
    let u_full = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^T");
    let mut sigma: Vec<f64> = svd.singular_values.iter().copied().collect();
    let mut order: Vec<usize> = (0..sigma.len()).collect();
    order.sort_by(|a, b| sigma[*b].total_cmp(&sigma[*a]));
    let v = CMat::from_fn(c, order.len(), |i, j| v_t[(order[j], i)].conj());
    let u = CMat::from_fn(u_full.nrows().min(r), order.len(), |i, j| u_full[(i, order[j])]);
    sigma = order.iter().map(|&i| sigma[i]).collect();
    if r < c {
        sigma.truncate(r.min(c));
        let u = u.columns(0, r).into_owned();
        return FullSvd { u, sigma, v };
    }
    FullSvd { u, sigma, v }
}

/// Singular values in descending order.
pub fn singular_values(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn rank(m: &CMat, threshold: f64) -> usize {
    singular_values(m).iter().filter(|s| **s > threshold).count()
}

/// Orthonormal basis (as columns) of the kernel.
pub fn null_space(m: &CMat, threshold: f64) -> CMat {
    let c = m.ncols();
    let svd = full_svd(m);
    let r = svd.sigma.iter().filter(|s| **s > threshold).count();
    svd.v.columns(r, c - r).into_owned()
}

/// Orthonormal basis (as columns) of the range.
pub fn range_space(m: &CMat, threshold: f64) -> CMat {
    let svd = full_svd(m);
    let r = svd.sigma.iter().filter(|s| **s > threshold).count();
    svd.u.columns(0, r).into_owned()
}

/// Minimum-norm least-squares solution of `m x = b`.
pub fn lstsq_min_norm(m: &CMat, b: &CVec, threshold: f64) -> CVec {
    let svd = full_svd(m);
    let mut x = CVec::zeros(m.ncols());
    for (i, s) in svd.sigma.iter().enumerate() {
        if *s > threshold {
            let coeff = svd.u.column(i).dotc(b) / *s;
            x += svd.v.column(i) * coeff;
        }
    }
    x
}

/// Ascending eigenvalues of a Hermitian matrix.
pub fn hermitian_eigenvalues(m: &CMat) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let sym = (m + m.adjoint()) * C64::new(0.5, 0.0);
    let mut ev: Vec<f64> = sym.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Largest singular value.
pub fn operator_norm(m: &CMat) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}
