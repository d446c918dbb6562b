//! Uniform sampling grids, FFT projection and the non-polynomial operations
//! (pointwise division, pullback under nonlinear torus maps).

use super::domain::minor;
use super::{Domain, TrigForm, VectorField, C64};
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use rayon::prelude::*;
use rustfft::FftPlanner;
use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

pub const DEFAULT_DENOMINATOR_THRESHOLD: f64 = 1e-8;

/// Relative size below which projected coefficients are treated as round-off.
const PROJECTION_FLOOR: f64 = 1e-15;

/// Default grid resolution `4 B + 1` for bandwidth `B`.
pub fn default_grid(bandwidth: usize) -> usize {
    4 * bandwidth + 1
}

/// Coordinates of the flat index `idx` on the `res^n` grid, axis 0 slowest.
pub fn grid_point(idx: usize, res: usize, n: usize) -> Vec<f64> {
    let mut x = vec![0.0; n];
    let mut r = idx;
    for axis in (0..n).rev() {
        x[axis] = (r % res) as f64 / res as f64;
        r /= res;
    }
    x
}

fn wrap(k: i32, res: usize) -> usize {
    k.rem_euclid(res as i32) as usize
}

fn unwrap(i: usize, res: usize) -> i32 {
    if 2 * i < res {
        i as i32
    } else {
        i as i32 - res as i32
    }
}

fn fft_nd(data: &mut [C64], n: usize, res: usize, inverse: bool) {
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse { planner.plan_fft_inverse(res) } else { planner.plan_fft_forward(res) };
    let total = data.len();
    let mut line = vec![C64::new(0.0, 0.0); res];
    for axis in 0..n {
        let stride = res.pow((n - 1 - axis) as u32);
        let block = stride * res;
        for start in (0..total).step_by(block) {
            for off in 0..stride {
                let base = start + off;
                for (i, v) in line.iter_mut().enumerate() {
                    *v = data[base + i * stride];
                }
                fft.process(&mut line);
                for (i, v) in line.iter().enumerate() {
                    data[base + i * stride] = *v;
                }
            }
        }
    }
}

fn flat_index(k: &[i32], res: usize) -> usize {
    k.iter().fold(0, |acc, v| acc * res + wrap(*v, res))
}

/// Point values of every basis component of `a` on the `res^n` grid.
pub fn sample(a: &TrigForm, res: usize) -> Result<Vec<Vec<C64>>> {
    let bw = a.bandwidth();
    if res < 2 * bw + 1 {
        return Err(Error::GridTooCoarse { grid: res, bandwidth: bw });
    }
    let dom = a.domain();
    let n = dom.dim();
    let total = res.pow(n as u32);
    let nb = dom.basis(a.degree().min(n)).len();
    let mut comps = vec![vec![C64::new(0.0, 0.0); total]; nb];
    if a.degree() > n {
        return Ok(comps);
    }
    for (k, s, c) in a.terms() {
        comps[dom.basis_position(s)][flat_index(k, res)] += c;
    }
    comps.par_iter_mut().for_each(|buf| fft_nd(buf, n, res, true));
    Ok(comps)
}

/// Point values of the components of a vector field.
pub fn sample_field(x: &VectorField, res: usize) -> Result<Vec<Vec<C64>>> {
    let mut out = Vec::with_capacity(x.components().len());
    for c in x.components() {
        out.push(sample(c, res)?.remove(0));
    }
    Ok(out)
}

/// Projects grid values onto modes with `|k_i| <= cap` and returns the form
/// together with the L2 norm of everything that was dropped.
pub fn project(domain: &Domain, degree: usize, comps: Vec<Vec<C64>>, res: usize, cap: usize) -> Result<(TrigForm, f64)> {
    let n = domain.dim();
    let basis = domain.basis(degree).to_vec();
    if comps.len() != basis.len() {
        return Err(Error::InvalidTerm(format!("{} components for degree {degree}", comps.len())));
    }
    let total = res.pow(n as u32);
    let cap = cap.min((res - 1) / 2) as i32;
    let scale = 1.0 / total as f64;
    let transformed: Vec<Vec<C64>> = comps
        .into_par_iter()
        .map(|mut buf| {
            assert_eq!(buf.len(), total, "grid size mismatch");
            fft_nd(&mut buf, n, res, false);
            buf
        })
        .collect();
    let peak = transformed.iter().flatten().map(|c| c.norm() * scale).fold(0.0, f64::max);
    let floor = PROJECTION_FLOOR * peak.max(1.0);
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (bi, buf) in transformed.iter().enumerate() {
        for (idx, v) in buf.iter().enumerate() {
            let c = v * scale;
            if c.norm() == 0.0 {
                continue;
            }
            let mut k = vec![0i32; n];
            let mut r = idx;
            for axis in (0..n).rev() {
                k[axis] = unwrap(r % res, res);
                r /= res;
            }
            let inside = k.iter().all(|v| v.abs() <= cap);
            if inside && c.norm() > floor {
                kept.push((k, basis[bi], c));
            } else {
                dropped.push((k, basis[bi], c));
            }
        }
    }
    let form = TrigForm::from_terms(domain, degree, kept)?;
    let residual = TrigForm::from_terms(domain, degree, dropped)?.norm();
    Ok((form, residual))
}

/// `a(x)` as coefficient vector in the ordered basis of its degree.
pub fn eval_form(a: &TrigForm, x: &[f64]) -> Vec<C64> {
    a.eval(x)
}

/// Samples `a / f` and projects back, failing if `|f|` is not above the threshold
/// somewhere on the grid. The residual is the exact L2 norm of `result f - a`.
pub fn divide_pointwise(a: &TrigForm, f: &TrigForm, grid_res: usize, cap: usize) -> Result<(TrigForm, f64)> {
    divide_pointwise_with(a, f, grid_res, cap, DEFAULT_DENOMINATOR_THRESHOLD)
}

pub fn divide_pointwise_with(
    a: &TrigForm,
    f: &TrigForm,
    grid_res: usize,
    cap: usize,
    threshold: f64,
) -> Result<(TrigForm, f64)> {
    if f.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: f.degree() });
    }
    if !Arc::ptr_eq(a.domain(), f.domain()) && **a.domain() != **f.domain() {
        return Err(Error::DomainMismatch);
    }
    let bw = a.bandwidth().max(f.bandwidth());
    if grid_res < 2 * bw + 1 {
        return Err(Error::GridTooCoarse { grid: grid_res, bandwidth: bw });
    }
    let n = a.dim();
    let fv = sample(f, grid_res)?.remove(0);
    let (worst, value) = fv
        .iter()
        .enumerate()
        .map(|(i, v)| (i, v.norm()))
        .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
    if value <= threshold {
        return Err(Error::VanishingDenominator { point: grid_point(worst, grid_res, n), value, threshold });
    }
    let mut comps = sample(a, grid_res)?;
    for buf in comps.iter_mut() {
        for (v, d) in buf.iter_mut().zip(&fv) {
            *v /= d;
        }
    }
    let (q, _) = project(a.domain(), a.degree(), comps, grid_res, cap)?;
    let residual = (q.mul_fn(f) - a).norm();
    Ok((q, residual))
}

/// Point map `x -> (Phi(x), D Phi(x))` for custom torus maps.
pub type PointMap = Arc<dyn Fn(&[f64]) -> (Vec<f64>, DMatrix<f64>) + Send + Sync>;

/// Self-maps of the torus that forms can be pulled back along.
#[derive(Clone)]
pub enum TorusMap {
    /// `x -> A x + shift` with an integer matrix `A`; pulled back exactly.
    Affine { matrix: Vec<Vec<i32>>, shift: Vec<f64> },
    /// `x -> x + W(x)` for a real trigonometric displacement `W`.
    Displacement(VectorField),
    /// Arbitrary smooth map given pointwise with its Jacobian; `max_shift` bounds `|Phi(x) - x|`.
    Pointwise { map: PointMap, max_shift: f64 },
}

impl fmt::Debug for TorusMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TorusMap::Affine { matrix, shift } => {
                f.debug_struct("Affine").field("matrix", matrix).field("shift", shift).finish()
            }
            TorusMap::Displacement(w) => f.debug_tuple("Displacement").field(w).finish(),
            TorusMap::Pointwise { max_shift, .. } => f.debug_struct("Pointwise").field("max_shift", max_shift).finish(),
        }
    }
}

impl TorusMap {
    pub fn identity(n: usize) -> Self {
        let matrix = (0..n).map(|i| (0..n).map(|j| i32::from(i == j)).collect()).collect();
        TorusMap::Affine { matrix, shift: vec![0.0; n] }
    }

    pub fn translation(shift: Vec<f64>) -> Self {
        let n = shift.len();
        let matrix = (0..n).map(|i| (0..n).map(|j| i32::from(i == j)).collect()).collect();
        TorusMap::Affine { matrix, shift }
    }

    /// Image of a point and the Jacobian there.
    pub fn apply(&self, x: &[f64]) -> (Vec<f64>, DMatrix<f64>) {
        let n = x.len();
        match self {
            TorusMap::Affine { matrix, shift } => {
                let a = DMatrix::from_fn(n, n, |i, j| matrix[i][j] as f64);
                let y = (0..n).map(|i| (0..n).map(|j| a[(i, j)] * x[j]).sum::<f64>() + shift[i]).collect();
                (y, a)
            }
            TorusMap::Displacement(w) => {
                let y = x.iter().zip(w.eval(x)).map(|(a, b)| a + b.re).collect();
                let jac = DMatrix::from_fn(n, n, |i, j| {
                    f64::from(u8::from(i == j)) + w.component(i).partial(j).eval(x)[0].re
                });
                (y, jac)
            }
            TorusMap::Pointwise { map, .. } => map(x),
        }
    }
}

/// Outcome of a sampled pullback.
#[derive(Clone, Debug)]
pub struct PullbackReport {
    pub form: TrigForm,
    /// L2 norm of the modes lost in the final projection (zero for affine maps).
    pub residual: f64,
    pub grid_res: usize,
}

/// `Phi^* a`; exact for affine maps, sampled and projected to `|k_i| <= cap` otherwise.
pub fn pullback_graph(a: &TrigForm, map: &TorusMap, grid_res: usize, cap: usize) -> Result<PullbackReport> {
    let dom = a.domain();
    let n = dom.dim();
    match map {
        TorusMap::Affine { matrix, shift } => {
            if matrix.len() != n || matrix.iter().any(|r| r.len() != n) || shift.len() != n {
                return Err(Error::InvalidTerm("affine map has the wrong shape".into()));
            }
            let lin = DMatrix::from_fn(n, n, |i, j| matrix[i][j] as f64);
            let mut moved = TrigForm::zero(dom, a.degree());
            for (k, s, c) in a.terms() {
                let kt: Vec<i32> = (0..n).map(|j| (0..n).map(|i| k[i] * matrix[i][j]).sum()).collect();
                let phase: f64 = k.iter().zip(shift).map(|(x, v)| *x as f64 * v).sum();
                moved.accumulate(&kt, s, c * C64::from_polar(1.0, 2.0 * PI * phase));
            }
            Ok(PullbackReport { form: super::pullback_linear(&moved, &lin), residual: 0.0, grid_res })
        }
        _ => {
            let max_shift = match map {
                TorusMap::Displacement(w) => {
                    let bw = w.bandwidth();
                    let res = default_grid(bw).max(grid_res);
                    let vals = sample_field(w, res)?;
                    (0..res.pow(n as u32))
                        .map(|p| vals.iter().map(|c| c[p].re * c[p].re).sum::<f64>().sqrt())
                        .fold(0.0, f64::max)
                }
                TorusMap::Pointwise { max_shift, .. } => *max_shift,
                TorusMap::Affine { .. } => unreachable!(),
            };
            let bw = a.bandwidth();
            if 2.0 * PI * bw as f64 * max_shift > 1.0 {
                return Err(Error::Aliasing(format!(
                    "displacement {max_shift:e} against bandwidth {bw} exceeds the guard 1/(2 pi B)"
                )));
            }
            let bw_out = cap.max(bw);
            if grid_res < 2 * bw_out + 1 {
                return Err(Error::GridTooCoarse { grid: grid_res, bandwidth: bw_out });
            }
            let basis = dom.basis(a.degree()).to_vec();
            let total = grid_res.pow(n as u32);
            let values: Vec<Vec<C64>> = (0..total)
                .into_par_iter()
                .map(|p| {
                    let x = grid_point(p, grid_res, n);
                    let (y, jac) = map.apply(&x);
                    let ay = a.eval(&y);
                    basis
                        .iter()
                        .map(|t| {
                            basis
                                .iter()
                                .zip(&ay)
                                .map(|(s, v)| v * minor(&jac, *s, *t))
                                .sum::<C64>()
                        })
                        .collect()
                })
                .collect();
            let comps: Vec<Vec<C64>> = (0..basis.len()).map(|b| values.iter().map(|v| v[b]).collect()).collect();
            let (form, residual) = project(dom, a.degree(), comps, grid_res, cap)?;
            Ok(PullbackReport { form, residual, grid_res })
        }
    }
}
