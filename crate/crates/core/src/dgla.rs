//! The differential graded Lie algebra of a defining couple `(gamma, X)`:
//! bracket, twisted differential, the leafwise differential `d_b`, the class
//! of `b = i_X d gamma`, couple transformations and the conjugate differential.

use crate::error::{Error, Result};
use crate::forms::{
    contract, divide_pointwise, ext_d, interior, lie_derivative, pullback_linear, wedge, Domain, Freq, TrigForm,
    VectorField, C64,
};
use crate::hodge::{AssemblyMode, SpectralOperator, Space, TruncatedSpace};
use nalgebra::DMatrix;
use serde::Serialize;

/// Tolerance for `i_X gamma = 1` at construction.
pub const COUPLE_TOL: f64 = 1e-12;
/// Tolerance for membership in `Z*`.
pub const Z_TOL: f64 = 1e-12;

/// A 1-form `gamma` and a vector field `X` with `gamma(X) = 1`.
#[derive(Clone, Debug)]
pub struct DefiningCouple {
    gamma: TrigForm,
    x: VectorField,
}

impl DefiningCouple {
    pub fn new(gamma: TrigForm, x: VectorField) -> Result<Self> {
        Self::with_tolerance(gamma, x, COUPLE_TOL)
    }

    pub fn with_tolerance(gamma: TrigForm, x: VectorField, tol: f64) -> Result<Self> {
        if gamma.degree() != 1 {
            return Err(Error::InvalidCouple(format!("gamma has degree {}", gamma.degree())));
        }
        if **gamma.domain() != **x.domain() {
            return Err(Error::DomainMismatch);
        }
        let pairing = interior(&x, &gamma)?;
        let defect = (&pairing - &TrigForm::constant(gamma.domain(), 1.0)).max_abs();
        if defect > tol {
            return Err(Error::InvalidCouple(format!("gamma(X) differs from 1 by {defect:e}")));
        }
        Ok(DefiningCouple { gamma, x })
    }

    /// `gamma = dx_axis`, `X = d/dx_axis`.
    pub fn coordinate(domain: &Domain, axis: usize) -> Self {
        DefiningCouple { gamma: TrigForm::dx(domain, axis), x: VectorField::coordinate(domain, axis) }
    }

    pub fn domain(&self) -> &Domain {
        self.gamma.domain()
    }

    pub fn gamma(&self) -> &TrigForm {
        &self.gamma
    }

    pub fn x(&self) -> &VectorField {
        &self.x
    }

    /// `b = i_X d gamma`.
    pub fn b_form(&self) -> TrigForm {
        contract(&self.x, &ext_d(&self.gamma))
    }

    /// Constant `v` with `X = phi v` for a function `phi`, if one exists.
    pub fn constant_direction(&self) -> Option<Vec<f64>> {
        let comps = self.x.components();
        let (r, lead) = comps.iter().enumerate().max_by(|a, b| a.1.max_abs().total_cmp(&b.1.max_abs()))?;
        let (k0, s0, c0) = lead.terms().max_by(|a, b| a.2.norm().total_cmp(&b.2.norm()))?;
        let k0 = k0.clone();
        let mut v = vec![0.0; comps.len()];
        for (i, c) in comps.iter().enumerate() {
            let ratio = c.coeff(&k0, s0) / c0;
            if ratio.im.abs() > 1e-12 {
                return None;
            }
            if (c - &lead.scale(ratio)).max_abs() > 1e-12 {
                return None;
            }
            v[i] = if i == r { 1.0 } else { ratio.re };
        }
        Some(v)
    }

    /// The truncated `Z^degree` space used to assemble operators for this couple.
    pub fn z_space(&self, degree: usize, bandwidth: usize) -> Result<TruncatedSpace> {
        let direction = self.constant_direction().ok_or_else(|| {
            Error::Unsupported("Z-space assembly needs X of constant direction".into())
        })?;
        TruncatedSpace::new(self.domain(), Space::Z { degree, direction }, bandwidth)
    }

    /// Largest coefficient bandwidth of `gamma` and `X`.
    pub fn bandwidth(&self) -> usize {
        self.gamma.bandwidth().max(self.x.bandwidth())
    }
}

/// `{a, b} = L_X a ^ b - a ^ L_X b`.
pub fn bracket(a: &TrigForm, b: &TrigForm, x: &VectorField) -> Result<TrigForm> {
    let la = lie_derivative(x, a)?;
    let lb = lie_derivative(x, b)?;
    Ok(wedge(&la, b)? - wedge(a, &lb)?)
}

/// `delta a = d a + {gamma, a}`; a top-degree input gives the empty form of degree `n + 1`.
pub fn delta(a: &TrigForm, c: &DefiningCouple) -> Result<TrigForm> {
    if a.degree() >= a.dim() {
        return Ok(TrigForm::zero(a.domain(), a.degree() + 1));
    }
    Ok(ext_d(a) + bracket(&c.gamma, a, &c.x)?)
}

/// Whether `i_X a` vanishes within `Z_TOL`; functions always belong to `Z*`.
pub fn in_z(a: &TrigForm, c: &DefiningCouple) -> bool {
    z_defect(a, c) <= Z_TOL
}

/// Largest coefficient of `i_X a`.
pub fn z_defect(a: &TrigForm, c: &DefiningCouple) -> f64 {
    if a.degree() == 0 {
        0.0
    } else {
        contract(&c.x, a).max_abs()
    }
}

fn require_z(a: &TrigForm, c: &DefiningCouple) -> Result<()> {
    let defect = z_defect(a, c);
    if defect > Z_TOL {
        return Err(Error::NotInZ(defect));
    }
    Ok(())
}

/// Leafwise differential `d_b a = d a - gamma ^ i_X d a` on `Z*`.
pub fn d_b(a: &TrigForm, c: &DefiningCouple) -> Result<TrigForm> {
    require_z(a, c)?;
    d_b_unchecked(a, c)
}

pub(crate) fn d_b_unchecked(a: &TrigForm, c: &DefiningCouple) -> Result<TrigForm> {
    if a.degree() >= a.dim() {
        return Ok(TrigForm::zero(a.domain(), a.degree() + 1));
    }
    let da = ext_d(a);
    Ok(&da - &wedge(&c.gamma, &contract(&c.x, &da))?)
}

/// `a - gamma ^ i_X a`, the `Z*` component along the splitting `TL = ker gamma + R X`.
pub fn project_z(a: &TrigForm, c: &DefiningCouple) -> Result<TrigForm> {
    if a.degree() == 0 {
        return Ok(a.clone());
    }
    Ok(a - &wedge(&c.gamma, &contract(&c.x, a))?)
}

/// Norms of the three equivalent integrability conditions.
#[derive(Clone, Debug, Serialize)]
pub struct FrobeniusReport {
    /// `|d gamma ^ gamma|`
    pub wedge_residual: f64,
    /// `|d gamma + i_X d gamma ^ gamma|`
    pub contraction_residual: f64,
    /// `|d gamma + {gamma, gamma} / 2|`
    pub bracket_residual: f64,
    pub integrable: bool,
    /// Whether all three residuals fall on the same side of the tolerance.
    pub consistent: bool,
    pub tol: f64,
}

pub fn frobenius_checks(c: &DefiningCouple, tol: f64) -> Result<FrobeniusReport> {
    let dg = ext_d(&c.gamma);
    let n = c.domain().dim();
    let wedge_residual = if n >= 3 { wedge(&dg, &c.gamma)?.norm() } else { 0.0 };
    let contraction_residual = (&dg + &wedge(&c.b_form(), &c.gamma)?).norm();
    let bracket_residual = (&dg + &bracket(&c.gamma, &c.gamma, &c.x)?.scale_real(0.5)).norm();
    let flags = [wedge_residual <= tol, contraction_residual <= tol, bracket_residual <= tol];
    Ok(FrobeniusReport {
        wedge_residual,
        contraction_residual,
        bracket_residual,
        integrable: flags.iter().all(|f| *f),
        consistent: flags.iter().all(|f| *f == flags[0]),
        tol,
    })
}

pub(crate) fn require_integrable(c: &DefiningCouple, tol: f64) -> Result<()> {
    let r = frobenius_checks(c, tol)?;
    if !r.integrable {
        return Err(Error::NotIntegrable(r.wedge_residual.max(r.contraction_residual).max(r.bracket_residual)));
    }
    Ok(())
}

pub fn b_form(c: &DefiningCouple) -> TrigForm {
    c.b_form()
}

/// Outcome of solving `d_b lambda = b`.
#[derive(Clone, Debug, Serialize)]
pub struct CClassReport {
    pub vanishes: bool,
    pub witness: Option<TrigForm>,
    /// `|d_b lambda - b|` for the least-squares `lambda`.
    pub residual: f64,
    /// Norm of the part of `b` outside `im d_b` in the truncated space.
    pub obstruction_norm: f64,
    /// Largest coefficient of `i_{e^{-lambda} X} d(e^lambda gamma)` when a witness exists.
    pub condition_iii: Option<f64>,
    pub bandwidth: usize,
}

/// Decides whether the class of `b` vanishes by a least-squares solve of
/// `d_b lambda = b` over functions of bandwidth `bandwidth`.
pub fn c_class(c: &DefiningCouple, bandwidth: usize, tol: f64) -> Result<CClassReport> {
    require_integrable(c, tol)?;
    let b = c.b_form();
    let src = c.z_space(0, bandwidth)?;
    let dst = image_space(c, &src, &b, |f| d_b_unchecked(f, c))?;
    let op = SpectralOperator::assemble_mode(&src, &dst, AssemblyMode::Strict, |f| d_b_unchecked(f, c))?;
    let (lambda, leftover) = op.solve_min_norm(&b, crate::linalg::RANK_THRESHOLD)?;
    let lambda = lambda.chop(1e-14).real_part();
    let residual = (d_b_unchecked(&lambda, c)? - &b).norm();
    let obstruction_norm = leftover.norm();
    let vanishes = residual <= tol;
    let condition_iii = if vanishes {
        let t = psi_couple(c, &lambda)?;
        Some(contract(&t.x, &ext_d(&t.gamma)).max_abs())
    } else {
        None
    };
    Ok(CClassReport {
        vanishes,
        witness: if vanishes { Some(lambda) } else { None },
        residual,
        obstruction_norm,
        condition_iii,
        bandwidth,
    })
}

/// `Z^{p+1}` space supported on the frequencies reached by `op` from `src`, together with those of `extra`.
pub(crate) fn image_space<F>(c: &DefiningCouple, src: &TruncatedSpace, extra: &TrigForm, op: F) -> Result<TruncatedSpace>
where
    F: Fn(&TrigForm) -> Result<TrigForm>,
{
    let mut support: Vec<Freq> = extra.frequencies();
    let bd = src.block_dim();
    for fi in 0..src.freqs().len() {
        for j in 0..bd {
            let mut local = vec![C64::new(0.0, 0.0); bd];
            local[j] = C64::new(1.0, 0.0);
            support.extend(op(&src.block_form(fi, &local))?.frequencies());
        }
    }
    let direction = c.constant_direction().ok_or_else(|| Error::Unsupported("X must have constant direction".into()))?;
    TruncatedSpace::with_support(c.domain(), Space::Z { degree: src.degree() + 1, direction }, support)
}

/// Truncated exponential series of a function with a bound on the omitted tail.
pub fn exp_series(lambda: &TrigForm) -> Result<(TrigForm, f64)> {
    if lambda.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: lambda.degree() });
    }
    let l1: f64 = lambda.terms().map(|(_, _, c)| c.norm()).sum();
    let mut sum = TrigForm::constant(lambda.domain(), 1.0);
    let mut term = sum.clone();
    let mut k = 0u32;
    let mut bound = l1;
    while bound > 1e-17 {
        k += 1;
        if k > 200 {
            return Err(Error::Numerical("exponential series did not converge".into()));
        }
        term = term.mul_fn(lambda).scale_real(1.0 / f64::from(k)).chop(1e-18);
        sum.add_assign(&term);
        bound *= l1 / f64::from(k + 1);
    }
    let tail = bound * l1.exp();
    Ok((sum.chop(1e-17), tail))
}

/// The couple `(e^lambda gamma, e^{-lambda} X)`.
pub fn psi_couple(c: &DefiningCouple, lambda: &TrigForm) -> Result<DefiningCouple> {
    let (e, _) = exp_series(lambda)?;
    let (em, _) = exp_series(&-lambda)?;
    DefiningCouple::with_tolerance(c.gamma.mul_fn(&e).chop(1e-17), c.x.scale_fn(&em).chop(1e-17), 1e-10)
}

/// `Psi(a) = e^lambda a` with the series tail bound.
pub fn psi_transform(a: &TrigForm, lambda: &TrigForm, c: &DefiningCouple) -> Result<(TrigForm, f64)> {
    require_z(a, c)?;
    let (e, tail) = exp_series(lambda)?;
    Ok((a.mul_fn(&e).chop(1e-17), tail * a.terms().map(|(_, _, v)| v.norm()).sum::<f64>()))
}

fn require_tangent(v: &VectorField, c: &DefiningCouple) -> Result<()> {
    let g = interior(v, &c.gamma)?.max_abs();
    if g > Z_TOL {
        return Err(Error::Precondition(format!("V is not tangent to ker gamma (gamma(V) = {g:e})")));
    }
    Ok(())
}

/// `Theta(a) = a + (-1)^{deg a} i_V a ^ gamma` for `V` tangent to `ker gamma`.
pub fn theta_transform(a: &TrigForm, v: &VectorField, c: &DefiningCouple) -> Result<TrigForm> {
    require_tangent(v, c)?;
    require_z(a, c)?;
    if a.degree() == 0 {
        return Ok(a.clone());
    }
    let sign = if a.degree() % 2 == 0 { 1.0 } else { -1.0 };
    Ok(a + &wedge(&interior(v, a)?, &c.gamma)?.scale_real(sign))
}

/// `F_V a = (1 + i_V a)^{-1} (a - (i_V a) gamma)` on 1-forms, with the division residual.
pub fn f_v_transform(
    a: &TrigForm,
    v: &VectorField,
    c: &DefiningCouple,
    grid_res: usize,
    cap: usize,
) -> Result<(TrigForm, f64)> {
    require_tangent(v, c)?;
    require_z(a, c)?;
    if a.degree() != 1 {
        return Err(Error::DegreeMismatch { expected: 1, found: a.degree() });
    }
    let iva = interior(v, a)?;
    let num = a - &c.gamma.mul_fn(&iva);
    let den = &TrigForm::constant(a.domain(), 1.0) + &iva;
    divide_pointwise(&num, &den, grid_res, cap)
}

/// Leafwise complex structure `K` on the tangent space of a hypersurface torus:
/// `J` followed by projection along the transverse field, so that `K X = 0`
/// and `K = J` on `ker gamma`.
#[derive(Clone, Debug)]
pub struct LeafwiseJ {
    domain: Domain,
    matrix: DMatrix<f64>,
}

impl LeafwiseJ {
    pub fn new(domain: &Domain, matrix: DMatrix<f64>) -> Result<Self> {
        let n = domain.dim();
        if matrix.shape() != (n, n) {
            return Err(Error::InvalidComplexStructure("leafwise J has the wrong shape".into()));
        }
        Ok(LeafwiseJ { domain: domain.clone(), matrix })
    }

    /// `J d/dx_a = d/dx_b` for each listed pair `(a, b)`, zero on the remaining axes.
    pub fn from_pairs(domain: &Domain, pairs: &[(usize, usize)]) -> Result<Self> {
        let n = domain.dim();
        let mut m = DMatrix::zeros(n, n);
        for &(a, b) in pairs {
            if a >= n || b >= n || a == b {
                return Err(Error::InvalidComplexStructure(format!("bad axis pair ({a}, {b})")));
            }
            m[(b, a)] = 1.0;
            m[(a, b)] = -1.0;
        }
        Self::new(domain, m)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Checks `K X = 0` and `K^2 = -1` on `ker gamma` at the constant direction of `X`.
    pub fn validate(&self, c: &DefiningCouple) -> Result<()> {
        let v = c.constant_direction().ok_or_else(|| Error::Unsupported("X must have constant direction".into()))?;
        let n = v.len();
        let kv: f64 = (0..n).map(|i| (0..n).map(|j| self.matrix[(i, j)] * v[j]).sum::<f64>().abs()).sum();
        if kv > 1e-12 {
            return Err(Error::InvalidComplexStructure(format!("K X = {kv:e} is not zero")));
        }
        Ok(())
    }

    /// Action on forms of any degree: `(K a)(V_1, ..) = a(-K V_1, ..)`, which is
    /// `(J a)(V) = -a(J V)` on 1-forms and vanishes on `X`.
    pub fn apply(&self, a: &TrigForm) -> TrigForm {
        pullback_linear(a, &(-&self.matrix))
    }

    /// Inverse action on `ker gamma`: `a(K V_1, ..)`.
    pub fn apply_inverse(&self, a: &TrigForm) -> TrigForm {
        pullback_linear(a, &self.matrix)
    }
}

/// Conjugate differential on `Z*`: `J^{-1} delta J`, evaluated on `ker gamma`
/// and extended by zero on `X`. On functions this is `-J delta p`.
pub fn delta_c(a: &TrigForm, c: &DefiningCouple, k: &LeafwiseJ) -> Result<TrigForm> {
    require_z(a, c)?;
    match a.degree() {
        0 => Ok(k.apply_inverse(&delta(a, c)?)),
        1 => Ok(k.apply_inverse(&delta(&k.apply(a), c)?)),
        d => Err(Error::UnsupportedDegree { op: "delta_c", degree: d }),
    }
}

/// `d_b^c p = -J d_b p` on functions.
pub fn d_b_c(p: &TrigForm, c: &DefiningCouple, k: &LeafwiseJ) -> Result<TrigForm> {
    if p.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: p.degree() });
    }
    Ok(k.apply_inverse(&d_b(p, c)?))
}
