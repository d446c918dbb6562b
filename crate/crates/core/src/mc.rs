//! Maurer-Cartan residuals, the gauge action of diffeomorphisms, order-by-order
//! extension of first-order deformations and the tangent-cone test on products.

use crate::dgla::{bracket, delta, image_space, in_z, require_integrable, z_defect, DefiningCouple};
use crate::error::{Error, Result};
use crate::forms::{
    grid_point, interior, project, sample, Freq, IndexSet, TorusMap, TrigForm, VectorField, C64,
    DEFAULT_DENOMINATOR_THRESHOLD,
};
use crate::hodge::SpectralOperator;
use crate::linalg::RANK_THRESHOLD;
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;
use std::f64::consts::PI;

/// Tolerance used when an operation requires an integrable couple.
pub const INTEGRABILITY_TOL: f64 = 1e-10;
/// Norm above which the part of a right-hand side outside `im delta` is an obstruction.
pub const OBSTRUCTION_THRESHOLD: f64 = 1e-8;

/// `delta a + {a, a} / 2` and its L2 norm.
pub fn mc_residual(a: &TrigForm, c: &DefiningCouple) -> Result<(TrigForm, f64)> {
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    if !in_z(a, c) {
        return Err(Error::NotInZ(z_defect(a, c)));
    }
    require_integrable(c, INTEGRABILITY_TOL)?;
    let r = delta(a, c)? + bracket(a, a, c.x())?.scale_real(0.5);
    let norm = r.norm();
    Ok((r, norm))
}

/// `a - delta(i_Y gamma)`.
pub fn gauge_infinitesimal(a: &TrigForm, y: &VectorField, c: &DefiningCouple) -> Result<TrigForm> {
    if !in_z(a, c) {
        return Err(Error::NotInZ(z_defect(a, c)));
    }
    Ok(a - &delta(&interior(y, c.gamma())?, c)?)
}

/// Diffeomorphisms acting on deformations.
#[derive(Clone, Debug)]
pub enum GaugeElement {
    Map(TorusMap),
    /// Time-`t` flow of `Y`, integrated with `steps` classical Runge-Kutta steps.
    Flow { y: VectorField, t: f64, steps: usize },
}

impl GaugeElement {
    pub fn flow(y: &VectorField, t: f64) -> Self {
        GaugeElement::Flow { y: y.clone(), t, steps: 32 }
    }
}

struct FlowField {
    comps: Vec<TrigForm>,
    partials: Vec<Vec<TrigForm>>,
}

impl FlowField {
    fn new(y: &VectorField) -> Self {
        let n = y.domain().dim();
        let comps = y.components().to_vec();
        let partials = comps.iter().map(|c| (0..n).map(|j| c.partial(j)).collect()).collect();
        FlowField { comps, partials }
    }

    fn rhs(&self, x: &[f64], d: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
        let n = x.len();
        let v: Vec<f64> = self.comps.iter().map(|c| c.eval(x)[0].re).collect();
        let dy = DMatrix::from_fn(n, n, |i, j| self.partials[i][j].eval(x)[0].re);
        (v, dy * d)
    }

    fn integrate(&self, x0: &[f64], t: f64, steps: usize) -> (Vec<f64>, DMatrix<f64>) {
        let n = x0.len();
        let h = t / steps as f64;
        let mut x = x0.to_vec();
        let mut d = DMatrix::identity(n, n);
        let shift = |x: &[f64], k: &[f64], s: f64| -> Vec<f64> { x.iter().zip(k).map(|(a, b)| a + s * b).collect() };
        for _ in 0..steps {
            let (k1, m1) = self.rhs(&x, &d);
            let (k2, m2) = self.rhs(&shift(&x, &k1, h / 2.0), &(&d + &m1 * (h / 2.0)));
            let (k3, m3) = self.rhs(&shift(&x, &k2, h / 2.0), &(&d + &m2 * (h / 2.0)));
            let (k4, m4) = self.rhs(&shift(&x, &k3, h), &(&d + &m3 * h));
            for i in 0..n {
                x[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            d += (m1 + m2 * 2.0 + m3 * 2.0 + m4) * (h / 6.0);
        }
        (x, d)
    }
}

/// A gauge-transformed deformation with the projection residual of the final sampling.
#[derive(Clone, Debug, Serialize)]
pub struct GaugeResult {
    pub form: TrigForm,
    pub residual: f64,
    pub grid_res: usize,
}

/// `chi(Phi)(a) = (Phi^*(gamma + a)(X))^{-1} Phi^*(gamma + a) - gamma`, evaluated
/// pointwise on the grid and projected to `|k_i| <= cap`.
pub fn gauge_action(
    phi: &GaugeElement,
    a: &TrigForm,
    c: &DefiningCouple,
    grid_res: usize,
    cap: usize,
) -> Result<GaugeResult> {
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    if !in_z(a, c) {
        return Err(Error::NotInZ(z_defect(a, c)));
    }
    let dom = c.domain().clone();
    let n = dom.dim();
    let total_form = c.gamma() + a;
    let bw = total_form.bandwidth();
    if grid_res < 2 * cap.max(bw) + 1 {
        return Err(Error::GridTooCoarse { grid: grid_res, bandwidth: cap.max(bw) });
    }
    let total = grid_res.pow(n as u32);
    let flow = match phi {
        GaugeElement::Flow { y, steps, .. } => {
            if *steps == 0 {
                return Err(Error::Precondition("flow needs at least one step".into()));
            }
            Some(FlowField::new(y))
        }
        GaugeElement::Map(_) => None,
    };
    let maps: Vec<(Vec<f64>, DMatrix<f64>)> = (0..total)
        .into_par_iter()
        .map(|p| {
            let x = grid_point(p, grid_res, n);
            match phi {
                GaugeElement::Map(m) => m.apply(&x),
                GaugeElement::Flow { t, steps, .. } => flow.as_ref().expect("flow field").integrate(&x, *t, *steps),
            }
        })
        .collect();
    if !matches!(phi, GaugeElement::Map(TorusMap::Affine { .. })) {
        let shift = maps
            .iter()
            .enumerate()
            .map(|(p, (y, _))| {
                let x = grid_point(p, grid_res, n);
                x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
            })
            .fold(0.0, f64::max);
        if 2.0 * PI * bw as f64 * shift > 1.0 {
            return Err(Error::Aliasing(format!("displacement {shift:e} against bandwidth {bw}")));
        }
    }
    let xs = crate::forms::sample_field(c.x(), grid_res)?;
    let gs = sample(c.gamma(), grid_res)?;
    let values: Vec<Result<Vec<C64>>> = (0..total)
        .into_par_iter()
        .map(|p| {
            let (y, jac) = &maps[p];
            let w = total_form.eval(y);
            let pulled: Vec<C64> = (0..n).map(|k| (0..n).map(|i| w[i] * jac[(i, k)]).sum()).collect();
            let den: C64 = (0..n).map(|k| pulled[k] * xs[k][p]).sum();
            if den.norm() <= DEFAULT_DENOMINATOR_THRESHOLD {
                return Err(Error::VanishingDenominator {
                    point: grid_point(p, grid_res, n),
                    value: den.norm(),
                    threshold: DEFAULT_DENOMINATOR_THRESHOLD,
                });
            }
            Ok((0..n).map(|k| pulled[k] / den - gs[k][p]).collect())
        })
        .collect();
    let values: Vec<Vec<C64>> = values.into_iter().collect::<Result<_>>()?;
    let comps: Vec<Vec<C64>> = (0..n).map(|k| values.iter().map(|v| v[k]).collect()).collect();
    let (form, residual) = project(&dom, 1, comps, grid_res, cap)?;
    Ok(GaugeResult { form, residual, grid_res })
}

/// One row of a finite-difference convergence table.
#[derive(Clone, Debug, Serialize)]
pub struct DerivativeRow {
    pub t: f64,
    /// Distance from the analytic derivative.
    pub error: f64,
    /// Distance from the negated analytic derivative.
    pub mirror_error: f64,
    pub projection_residual: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GaugeDerivativeReport {
    /// `-delta(i_Y gamma)`.
    pub target: TrigForm,
    pub rows: Vec<DerivativeRow>,
    /// `log2` of successive error ratios.
    pub orders: Vec<f64>,
    pub min_order: f64,
}

/// Central differences of `t -> chi(Phi_{-t}^Y)(0)`, the action through the inverse
/// flow, compared with `-delta(i_Y gamma)`.
pub fn gauge_derivative_check(
    y: &VectorField,
    c: &DefiningCouple,
    t_steps: &[f64],
    grid_res: usize,
    cap: usize,
) -> Result<GaugeDerivativeReport> {
    require_integrable(c, INTEGRABILITY_TOL)?;
    let target = -delta(&interior(y, c.gamma())?, c)?;
    let zero = TrigForm::zero(c.domain(), 1);
    let mut rows = Vec::new();
    for &t in t_steps {
        let back = gauge_action(&GaugeElement::flow(y, -t), &zero, c, grid_res, cap)?;
        let fwd = gauge_action(&GaugeElement::flow(y, t), &zero, c, grid_res, cap)?;
        let fd = (&back.form - &fwd.form).scale_real(1.0 / (2.0 * t));
        rows.push(DerivativeRow {
            t,
            error: (&fd - &target).norm(),
            mirror_error: (&fd + &target).norm(),
            projection_residual: back.residual.max(fwd.residual),
        });
    }
    let orders = convergence_orders(&rows);
    let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(GaugeDerivativeReport { target, rows, orders, min_order })
}

/// Observed orders `log(e_i / e_{i+1}) / log(t_i / t_{i+1})`.
pub fn convergence_orders(rows: &[DerivativeRow]) -> Vec<f64> {
    rows.windows(2).map(|w| (w[0].error / w[1].error).ln() / (w[0].t / w[1].t).ln()).collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct Obstruction {
    pub order: usize,
    /// Component of the order-`k` right-hand side orthogonal to `im delta`.
    pub witness: TrigForm,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FormalMcSeries {
    /// `a_1, .., a_K` for the solved orders.
    pub coefficients: Vec<TrigForm>,
    pub order: usize,
    /// `|delta a_k + sum_{i+j=k} {a_i, a_j} / 2|` for every solved order.
    pub residual_per_order: Vec<f64>,
    pub obstruction: Option<Obstruction>,
    pub bandwidth: usize,
}

/// Solves `delta a_k = -1/2 sum_{i+j=k} {a_i, a_j}` order by order with
/// minimum-norm solutions; stops at the first order whose right-hand side has a
/// component outside `im delta` of norm above [`OBSTRUCTION_THRESHOLD`].
pub fn formal_mc_extend(
    beta: &TrigForm,
    order: usize,
    c: &DefiningCouple,
    bandwidth: usize,
    tol: f64,
) -> Result<FormalMcSeries> {
    if beta.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: beta.degree() });
    }
    if !in_z(beta, c) {
        return Err(Error::NotInZ(z_defect(beta, c)));
    }
    require_integrable(c, INTEGRABILITY_TOL)?;
    let closed = delta(beta, c)?.norm();
    if closed > tol {
        return Err(Error::Precondition(format!("first-order term is not delta-closed (|delta beta| = {closed:e})")));
    }
    let mut coeffs = vec![beta.clone()];
    let mut residuals = vec![closed];
    let mut obstruction = None;
    let mut used_bw = bandwidth.max(beta.bandwidth());
    for k in 2..=order {
        let mut rhs = TrigForm::zero(c.domain(), 2);
        for i in 1..k {
            rhs.add_assign(&bracket(&coeffs[i - 1], &coeffs[k - i - 1], c.x())?);
        }
        let rhs = rhs.scale_real(-0.5);
        let b = bandwidth.max(rhs.bandwidth());
        used_bw = used_bw.max(b);
        let src = c.z_space(1, b)?;
        let dst = image_space(c, &src, &rhs, |f| delta(f, c))?;
        let op = SpectralOperator::assemble(&src, &dst, |f| delta(f, c))?;
        let (a_k, leftover) = op.solve_min_norm(&rhs, RANK_THRESHOLD)?;
        let a_k = a_k.chop(1e-14);
        let norm = leftover.norm();
        if norm > OBSTRUCTION_THRESHOLD {
            obstruction = Some(Obstruction { order: k, witness: leftover.chop(1e-14), norm });
            break;
        }
        residuals.push((delta(&a_k, c)? - &rhs).norm());
        coeffs.push(a_k);
    }
    Ok(FormalMcSeries {
        order: coeffs.len(),
        coefficients: coeffs,
        residual_per_order: residuals,
        obstruction,
        bandwidth: used_bw,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Wronskian {
    pub j: usize,
    pub k: usize,
    /// `beta_j' beta_k - beta_k' beta_j` as a function of the transverse coordinate.
    pub value: TrigForm,
    pub norm: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct Factorization {
    pub a: TrigForm,
    /// Unit vector with positive first nonzero entry.
    pub c: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct TangentConeVerdict {
    pub in_cone: bool,
    pub transverse_axis: usize,
    /// Coefficient functions `beta_j(s)` of the reduced part along `tau_j`.
    pub components: Vec<TrigForm>,
    pub wronskians: Vec<Wronskian>,
    pub factorization: Option<Factorization>,
    /// Norm of the reduced part not spanned by the `tau_j`.
    pub unexplained: f64,
}

/// Tangent-cone test on a product `S^1 x T^p` with `gamma = ds`, `X = d/ds`.
///
/// The leaf-exact part of `beta` (nonzero leaf frequencies) is discarded; the
/// rest is written as `sum beta_j(s) tau_j` and the pairwise Wronskians decide.
pub fn tangent_cone_test_product(
    beta: &TrigForm,
    tau: &[TrigForm],
    c: &DefiningCouple,
    tol: f64,
) -> Result<TangentConeVerdict> {
    let dom = c.domain().clone();
    let n = dom.dim();
    let s = (0..n)
        .find(|ax| *c.gamma() == TrigForm::dx(&dom, *ax) && c.x().components() == VectorField::coordinate(&dom, *ax).components())
        .ok_or_else(|| Error::Precondition("couple is not a recognised product (gamma = ds, X = d/ds)".into()))?;
    if !in_z(beta, c) {
        return Err(Error::NotInZ(z_defect(beta, c)));
    }
    let zero: Freq = vec![0; n];
    let mut tvec = Vec::new();
    for t in tau {
        if t.degree() != 1 || t.frequencies().iter().any(|k| *k != zero) || t.mean_coeff(IndexSet::single(s)).norm() != 0.0 {
            return Err(Error::Precondition("tau must be constant leaf 1-forms".into()));
        }
        tvec.push(t.block(&zero));
    }
    let p = tvec.len();
    let reduced = beta.filter(|k, _| k.iter().enumerate().all(|(i, v)| i == s || *v == 0));
    let gram = dom.gram(1);
    let inner = |a: &[C64], b: &[C64]| -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for j in 0..n {
                acc += a[i] * b[j].conj() * gram[(i, j)];
            }
        }
        acc
    };
    let m = nalgebra::DMatrix::<C64>::from_fn(p, p, |i, j| inner(&tvec[j], &tvec[i]));
    let minv = m.try_inverse().ok_or_else(|| Error::Precondition("tau is linearly dependent".into()))?;
    let mut comps = vec![TrigForm::zero(&dom, 0); p];
    let mut unexplained = TrigForm::zero(&dom, 1);
    for k in reduced.frequencies() {
        let blk = reduced.block(&k);
        let rhs: Vec<C64> = tvec.iter().map(|t| inner(&blk, t)).collect();
        let coef: Vec<C64> = (0..p).map(|i| (0..p).map(|j| minv[(i, j)] * rhs[j]).sum()).collect();
        let mut rest = blk.clone();
        for (j, cj) in coef.iter().enumerate() {
            comps[j].add_assign(&TrigForm::monomial(&dom, &k, &[], *cj)?);
            for i in 0..n {
                rest[i] -= cj * tvec[j][i];
            }
        }
        for (i, set) in dom.basis(1).iter().enumerate() {
            unexplained.add_assign(&TrigForm::from_terms(&dom, 1, vec![(k.clone(), *set, rest[i])])?);
        }
    }
    let comps: Vec<TrigForm> = comps.into_iter().map(|f| f.chop(1e-14)).collect();
    let mut wronskians = Vec::new();
    for j in 0..p {
        for k in j + 1..p {
            let value = (comps[j].partial(s).mul_fn(&comps[k]) - comps[k].partial(s).mul_fn(&comps[j])).chop(1e-12);
            let norm = value.norm();
            wronskians.push(Wronskian { j: j + 1, k: k + 1, value, norm });
        }
    }
    let in_cone = wronskians.iter().all(|w| w.norm <= tol);
    let factorization = if in_cone { factorize(&comps) } else { None };
    Ok(TangentConeVerdict {
        in_cone,
        transverse_axis: s,
        components: comps,
        wronskians,
        factorization,
        unexplained: unexplained.norm(),
    })
}

fn factorize(comps: &[TrigForm]) -> Option<Factorization> {
    let (lead, lf) = comps.iter().enumerate().max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))?;
    let ln = lf.norm();
    if ln == 0.0 {
        return None;
    }
    let ratios: Vec<f64> = comps
        .iter()
        .map(|f| crate::forms::l2_inner(f, lf).map(|v| v.re / (ln * ln)).unwrap_or(0.0))
        .collect();
    let scale = ratios.iter().map(|r| r * r).sum::<f64>().sqrt();
    let first = ratios.iter().copied().find(|r| r.abs() > 1e-14).unwrap_or(1.0);
    let sign = first.signum();
    let c: Vec<f64> = ratios.iter().map(|r| sign * r / scale).collect();
    let mut a = TrigForm::zero(comps[lead].domain(), 0);
    for (f, cj) in comps.iter().zip(&c) {
        a.add_assign(&f.scale_real(*cj));
    }
    Some(Factorization { a: a.chop(1e-14), c })
}
