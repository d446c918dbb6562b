//! Levi-flat hypersurfaces `L = {r = 0}` in flat complex tori `C^m / Z^{2m}`:
//! the defining couple of a defining function, graph deformations `L_a`, the
//! forms `alpha_a`, and the linearised equations for Levi-flat deformations.
//!
//! `L` is always a coordinate hypersurface `{x_axis = 0}` and carries the
//! intrinsic coordinates of the remaining axes, in ambient order.

mod rigidity;
mod uniqueness;

pub use rigidity::{rigidity_certificate, uniform_samples, LeafBranch, LeafCertificate, RigidityCertificate, RigidityVerdict};
pub use uniqueness::{uniqueness_kernel_test, UniquenessReport};

use crate::dgla::{
    b_form, d_b, d_b_c, delta, delta_c, exp_series, project_z, psi_couple, z_defect, DefiningCouple, LeafwiseJ,
};
use crate::error::{Error, Result};
use crate::forms::{
    apply_j, default_grid, ext_d, grid_point, hodge_star, integrate_top, pullback_linear, project, sample,
    sup_norm_sq, wedge, ComplexStructure, Domain, FlatTorusDomain, IndexSet, TorusMap, TrigForm, VectorField, C64,
};
use crate::hodge::{harmonic_b_f, hodge_decompose, LeafSpec};
use crate::mc::{convergence_orders, mc_residual, DerivativeRow, GaugeElement};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

/// Default bound on `sup |a|` for graph functions.
pub const TUBE_RADIUS: f64 = 0.25;
/// Step ladder for the deformation derivative.
pub const DEFAULT_T_STEPS: [f64; 3] = [1e-2, 5e-3, 2.5e-3];

/// A flat complex torus with constant `J` and Kähler form `omega(u, v) = g(J u, v)`.
#[derive(Clone, Debug)]
pub struct ComplexTorusAmbient {
    j: ComplexStructure,
    omega: TrigForm,
}

impl ComplexTorusAmbient {
    pub fn new(j: ComplexStructure) -> Result<Self> {
        let dom = j.domain().clone();
        let n = dom.dim();
        let w = j.matrix().transpose() * dom.metric();
        let mut omega = TrigForm::zero(&dom, 2);
        for a in 0..n {
            for b in a + 1..n {
                if w[(a, b)] != 0.0 {
                    omega.add_assign(&TrigForm::monomial(&dom, &vec![0; n], &[a, b], C64::new(w[(a, b)], 0.0))?);
                }
            }
        }
        let mut top = omega.clone();
        for _ in 1..n / 2 {
            top = wedge(&top, &omega)?;
        }
        let lead = top.mean_coeff(IndexSet::all(n)).re * f64::from(dom.orientation());
        if lead <= 0.0 {
            return Err(Error::InvalidComplexStructure(format!("omega^m has top coefficient {lead:e}")));
        }
        Ok(ComplexTorusAmbient { j, omega })
    }

    /// `C^m / (Z + iZ)^m` with axes `(x1, y1, .., xm, ym)` and the unit metric.
    pub fn standard(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Precondition("complex dimension must be positive".into()));
        }
        let names = (1..=m).flat_map(|i| [format!("x{i}"), format!("y{i}")]).collect();
        let dom = FlatTorusDomain::with_axis_names(DMatrix::identity(2 * m, 2 * m), 1, names)?;
        Self::new(ComplexStructure::standard(&dom)?)
    }

    pub fn domain(&self) -> &Domain {
        self.j.domain()
    }

    pub fn j(&self) -> &ComplexStructure {
        &self.j
    }

    pub fn omega(&self) -> &TrigForm {
        &self.omega
    }

    pub fn complex_dim(&self) -> usize {
        self.domain().dim() / 2
    }
}

/// `r = e^{mu o pi} * scale * x_axis` near `L = {x_axis = 0}`, with `mu` a real
/// function on `L` (zero for linear defining functions).
#[derive(Clone, Debug)]
pub struct DefiningFunction {
    axis: usize,
    scale: f64,
    conformal: Option<TrigForm>,
}

impl DefiningFunction {
    pub fn linear(axis: usize, scale: f64) -> Result<Self> {
        if !scale.is_finite() || scale == 0.0 {
            return Err(Error::Precondition(format!("dr vanishes: scale {scale}")));
        }
        Ok(DefiningFunction { axis, scale, conformal: None })
    }

    /// Multiplies `r` by `e^mu`.
    pub fn with_conformal(mut self, mu: TrigForm) -> Result<Self> {
        if mu.degree() != 0 || !mu.is_real(1e-12) {
            return Err(Error::Precondition("conformal factor must be a real function".into()));
        }
        self.conformal = match self.conformal.take() {
            Some(old) => Some(old.checked_add(&mu)?),
            None => Some(mu),
        };
        Ok(self)
    }

    pub fn axis(&self) -> usize {
        self.axis
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn conformal(&self) -> Option<&TrigForm> {
        self.conformal.as_ref()
    }
}

/// A real function on `L` whose graph `L_a = {r = a o pi}` stays in the tube.
#[derive(Clone, Debug)]
pub struct GraphFunction {
    a: TrigForm,
    sup: f64,
}

impl GraphFunction {
    pub fn new(a: TrigForm, radius: f64) -> Result<Self> {
        if a.degree() != 0 {
            return Err(Error::DegreeMismatch { expected: 0, found: a.degree() });
        }
        if !a.is_real(1e-12) {
            return Err(Error::Precondition("graph function must be real".into()));
        }
        let res = (8 * a.bandwidth() + 1).max(33);
        let sup = if a.is_zero() {
            0.0
        } else {
            sample(&a, res)?[0].iter().map(|v| v.norm()).fold(0.0, f64::max)
        };
        if sup >= radius {
            return Err(Error::Precondition(format!("sup |a| = {sup} is not below the tube radius {radius}")));
        }
        Ok(GraphFunction { a, sup })
    }

    pub fn with_default_radius(a: TrigForm) -> Result<Self> {
        Self::new(a, TUBE_RADIUS)
    }

    pub fn a(&self) -> &TrigForm {
        &self.a
    }

    pub fn sup(&self) -> f64 {
        self.sup
    }
}

/// `alpha_a` together with its sampling diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub form: TrigForm,
    /// L2 norm of the modes dropped by the projection.
    pub residual: f64,
    /// Size of `i_X alpha_a`.
    pub z_defect: f64,
    /// Largest relative distance of `(gamma + alpha_a) o D pi` from the
    /// annihilator of `TL_a ∩ J TL_a` over the grid.
    pub kernel_defect: f64,
    pub min_denominator: f64,
    pub grid_res: usize,
}

/// Algebraic and geometric Levi-flatness of a graph.
#[derive(Clone, Debug, Serialize)]
pub struct LeviFlatVerdict {
    pub mc_residual: f64,
    /// `sup |theta_1 ^ theta_2 ^ d theta_2|` with `theta_1 = dR`, `theta_2 = dR o J`.
    pub geometric_residual: f64,
    pub algebraic_flat: bool,
    pub geometric_flat: bool,
    pub agree: bool,
    pub alpha: AlphaReport,
}

/// Central differences of `t -> alpha_{t p}` against `delta^c p`.
#[derive(Clone, Debug, Serialize)]
pub struct DeformationDerivativeReport {
    pub target: TrigForm,
    pub rows: Vec<DerivativeRow>,
    pub orders: Vec<f64>,
    pub min_order: f64,
    /// Error ratios `e_i / e_{i+1}` for successive steps.
    pub ratios: Vec<f64>,
    pub formal: bool,
    pub levi_flat: bool,
}

/// Both sides of the linearised equation for `p`.
#[derive(Clone, Debug, Serialize)]
pub struct EqPResidual {
    /// `delta delta^c p`.
    pub r1: TrigForm,
    /// The expanded right-hand side in terms of `d_b`, `d_b^c` and `b`.
    pub ra: TrigForm,
    pub r1_norm: f64,
    pub ra_norm: f64,
    pub identity_gap: f64,
}

/// The leafwise equation on a compact Kähler leaf in real and complex form.
#[derive(Clone, Debug, Serialize)]
pub struct KahlerLeafResidual {
    pub real: TrigForm,
    pub complex: TrigForm,
    pub real_norm: f64,
    pub complex_norm: f64,
    /// `|| real + 2 i complex ||`.
    pub repackaging_gap: f64,
    pub b_f: TrigForm,
    /// `∫_F p b_F ^ J b_F ^ omega^{m-1}`.
    pub moment: f64,
}

/// Output of [`rescale_couple`].
#[derive(Clone, Debug)]
pub struct RescaleReport {
    pub couple: DefiningCouple,
    /// `lambda` on the leaf.
    pub lambda: TrigForm,
    /// Harmonic target `b_F`.
    pub b_f: TrigForm,
    /// `|| b_hat|_F - b_F ||`.
    pub residual: f64,
    pub series_tail: f64,
}

/// A coordinate hypersurface of a complex torus with its defining couple and
/// leafwise complex structure.
#[derive(Clone, Debug)]
pub struct LeviHypersurface {
    ambient: ComplexTorusAmbient,
    r: DefiningFunction,
    surface: LeafSpec,
    couple: DefiningCouple,
    k: LeafwiseJ,
    /// `Z` at `L` for the linear part of `r`, ambient components.
    z0: Vec<f64>,
    /// Sign-fixed `J Z` for the linear part of `r`, intrinsic components.
    x0: Vec<f64>,
    /// `mu` and `e^{-mu}` when `r` has a conformal factor.
    mu: Option<(TrigForm, TrigForm)>,
}

/// Defining couple of `r` on `L`; see [`LeviHypersurface::new`].
pub fn levi_couple(r: &DefiningFunction, ambient: &ComplexTorusAmbient) -> Result<DefiningCouple> {
    Ok(LeviHypersurface::new(ambient, r)?.couple)
}

impl LeviHypersurface {
    /// `gamma = j^*(d^c r)` with `d^c r = -J dr`, `X = J Z` with
    /// `Z = grad r / |grad r|^2`, the sign of `X` fixed so that `gamma(X) = 1`.
    pub fn new(ambient: &ComplexTorusAmbient, r: &DefiningFunction) -> Result<Self> {
        let dom = ambient.domain();
        let n = dom.dim();
        if n < 4 {
            return Err(Error::Unsupported("Levi-flat hypersurfaces need complex dimension at least 2".into()));
        }
        let axis = r.axis;
        if axis >= n {
            return Err(Error::Precondition(format!("axis {axis} outside 0..{n}")));
        }
        let leaf_axes: Vec<usize> = (0..n).filter(|a| *a != axis).collect();
        let surface = LeafSpec::new(dom, &leaf_axes, &[0.0])?;
        let ldom = surface.domain().clone();

        let dr = TrigForm::dx(dom, axis).scale_real(r.scale);
        let gamma0 = surface.restrict(&-apply_j(&dr, ambient.j())?)?;

        let ginv = dom.metric_inv();
        let grad: Vec<f64> = (0..n).map(|i| ginv[(i, axis)] * r.scale).collect();
        if grad.iter().enumerate().any(|(i, v)| i != axis && v.abs() > 1e-14 * grad[axis].abs()) {
            return Err(Error::Unsupported("grad r must be parallel to the normal axis".into()));
        }
        let norm_sq = grad[axis] * r.scale;
        let z0: Vec<f64> = grad.iter().map(|v| v / norm_sq).collect();
        let jm = ambient.j().matrix();
        let jz: Vec<f64> = (0..n).map(|i| (0..n).map(|k| jm[(i, k)] * z0[k]).sum()).collect();
        if jz[axis].abs() > 1e-12 {
            return Err(Error::InvalidCouple("J Z is not tangent to L".into()));
        }
        let mut x0: Vec<f64> = leaf_axes.iter().map(|a| jz[*a]).collect();
        let pairing: f64 = (0..n - 1).map(|i| gamma0.coeff(&vec![0; n - 1], IndexSet::single(i)).re * x0[i]).sum();
        if (pairing.abs() - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidCouple(format!("|gamma(J Z)| = {} is not 1", pairing.abs())));
        }
        if pairing < 0.0 {
            x0.iter_mut().for_each(|v| *v = -*v);
        }
        let couple0 = DefiningCouple::new(gamma0, VectorField::constant(&ldom, &x0))?;

        let (couple, mu) = match &r.conformal {
            Some(mu) if !mu.is_zero() => {
                if **mu.domain() != *ldom {
                    return Err(Error::DomainMismatch);
                }
                let (em, _) = exp_series(&-mu)?;
                (psi_couple(&couple0, mu)?, Some((mu.clone(), em)))
            }
            _ => (couple0, None),
        };

        let kmat = DMatrix::from_fn(n - 1, n - 1, |i, j| jm[(leaf_axes[i], leaf_axes[j])]);
        let k = LeafwiseJ::new(&ldom, kmat)?;
        Ok(LeviHypersurface { ambient: ambient.clone(), r: r.clone(), surface, couple, k, z0, x0, mu })
    }

    pub fn ambient(&self) -> &ComplexTorusAmbient {
        &self.ambient
    }

    pub fn defining_function(&self) -> &DefiningFunction {
        &self.r
    }

    /// `L` as a subtorus of the ambient torus.
    pub fn surface(&self) -> &LeafSpec {
        &self.surface
    }

    /// Intrinsic domain of `L`.
    pub fn domain(&self) -> &Domain {
        self.surface.domain()
    }

    pub fn couple(&self) -> &DefiningCouple {
        &self.couple
    }

    pub fn leafwise_j(&self) -> &LeafwiseJ {
        &self.k
    }

    /// Ambient components of `Z` along `L` for the linear part of `r`.
    pub fn z(&self) -> &[f64] {
        &self.z0
    }

    /// Intrinsic axis of `L` along which `X` points, when there is one.
    pub fn transverse_axis(&self) -> Option<usize> {
        let nz: Vec<usize> = (0..self.x0.len()).filter(|i| self.x0[*i].abs() > 1e-14).collect();
        (nz.len() == 1).then(|| nz[0])
    }

    /// The leaf `{u_t = value}` of `L` with the restriction of `J` as complex structure.
    pub fn leaf(&self, value: f64) -> Result<LeafSpec> {
        let t = self
            .transverse_axis()
            .ok_or_else(|| Error::Unsupported("X is not along an axis of L".into()))?;
        let axes: Vec<usize> = (0..self.x0.len()).filter(|a| *a != t).collect();
        let leaf = LeafSpec::new(self.domain(), &axes, &[value])?;
        let km = self.k.matrix();
        let jf = DMatrix::from_fn(axes.len(), axes.len(), |i, j| km[(axes[i], axes[j])]);
        let jf = ComplexStructure::new(leaf.domain(), jf)?;
        leaf.with_complex(jf)
    }

    /// `a` divided by the conformal factor: the displacement of `L_a` along `Z`
    /// in units of the linear part of `r`.
    fn effective_graph(&self, a: &TrigForm) -> Result<TrigForm> {
        if **a.domain() != **self.domain() {
            return Err(Error::DomainMismatch);
        }
        Ok(match &self.mu {
            Some((_, em)) => a.mul_fn(em).chop(1e-17),
            None => a.clone(),
        })
    }

    /// `Phi_a(p) = p + a(pi(p)) Z`, which moves `L` onto `L_a` along the lines of `Z`.
    pub fn graph_map(&self, a: &GraphFunction) -> Result<GaugeElement> {
        let shift = self.surface.extend(&self.effective_graph(a.a())?)?;
        let w = VectorField::constant(self.ambient.domain(), &self.z0).scale_fn(&shift);
        Ok(GaugeElement::Map(TorusMap::Displacement(w)))
    }

    /// `Phi_a^{-1} = Phi_{-a}`: the displacement preserves `pi`.
    pub fn graph_map_inverse(&self, a: &GraphFunction) -> Result<GaugeElement> {
        let neg = GraphFunction { a: -a.a(), sup: a.sup };
        self.graph_map(&neg)
    }

    /// `alpha_a = (d^c_{J_a} r (X))^{-1} j^*(d^c_{J_a} r) - gamma` with
    /// `J_a = D Phi_a^{-1} J D Phi_a`, sampled on `L` and projected to `|k_i| <= cap`.
    pub fn alpha_of_graph(&self, a: &GraphFunction, grid_res: usize, cap: usize) -> Result<AlphaReport> {
        let ldom = self.domain().clone();
        let m = ldom.dim();
        let n = m + 1;
        let axis = self.r.axis;
        let leaf_axes = self.surface.leaf_axes().to_vec();
        let at = self.effective_graph(a.a())?;
        let grads: Vec<TrigForm> = (0..m).map(|i| at.partial(i)).collect();
        let bw = at.bandwidth() + self.couple.bandwidth();
        if grid_res < 2 * bw + 1 {
            return Err(Error::GridTooCoarse { grid: grid_res, bandwidth: bw });
        }
        let jm = self.ambient.j().matrix().clone();
        let ell: Vec<f64> = (0..n).map(|i| if i == axis { self.r.scale } else { 0.0 }).collect();
        let z = DVector::from_column_slice(&self.z0);
        let mu = self.mu.as_ref().map(|(m, _)| m.clone());
        let gamma = self.couple.gamma().clone();
        let xf = self.couple.x().clone();
        let total = grid_res.pow(m as u32);

        let point = |idx: usize| -> Result<(Vec<f64>, f64)> {
            let u = grid_point(idx, grid_res, m);
            let mut da = DVector::zeros(n);
            for (i, g) in grads.iter().enumerate() {
                da[leaf_axes[i]] = g.eval(&u)[0].re;
            }
            let dphi = DMatrix::identity(n, n) + &z * da.transpose();
            let dphi_inv = DMatrix::identity(n, n) - &z * da.transpose();
            let ja = &dphi_inv * &jm * &dphi;
            let factor = mu.as_ref().map_or(1.0, |f| f.eval(&u)[0].re.exp());
            let num: Vec<f64> = leaf_axes
                .iter()
                .map(|c| factor * (0..n).map(|r| ell[r] * ja[(r, *c)]).sum::<f64>())
                .collect();
            let xv: Vec<f64> = xf.eval(&u).iter().map(|v| v.re).collect();
            let den: f64 = num.iter().zip(&xv).map(|(p, q)| p * q).sum();
            if den.abs() <= crate::forms::DEFAULT_DENOMINATOR_THRESHOLD {
                return Err(Error::VanishingDenominator {
                    point: u,
                    value: den.abs(),
                    threshold: crate::forms::DEFAULT_DENOMINATOR_THRESHOLD,
                });
            }
            let g = gamma.eval(&u);
            Ok((num.iter().zip(&g).map(|(p, gi)| p / den - gi.re).collect(), den.abs()))
        };
        let values: Vec<(Vec<f64>, f64)> = (0..total).into_par_iter().map(point).collect::<Result<_>>()?;
        let min_denominator = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let comps: Vec<Vec<C64>> =
            (0..m).map(|i| values.iter().map(|v| C64::new(v.0[i], 0.0)).collect()).collect();
        let (form, residual) = project(&ldom, 1, comps, grid_res, cap)?;
        let form = form.real_part();
        let zd = z_defect(&form, &self.couple);

        let theta1: DVector<f64> = DVector::from_column_slice(&ell);
        let eta_form = self.couple.gamma() + &form;
        let kernel = |idx: usize| -> f64 {
            let u = grid_point(idx, grid_res, m);
            let mut da = DVector::zeros(n);
            for (i, g) in grads.iter().enumerate() {
                da[leaf_axes[i]] = g.eval(&u)[0].re;
            }
            let t1 = &theta1 - &da;
            let t2 = jm.transpose() * &t1;
            let mut eta = DVector::zeros(n);
            for (i, v) in eta_form.eval(&u).iter().enumerate() {
                eta[leaf_axes[i]] = v.re;
            }
            let basis = DMatrix::from_columns(&[t1, t2]);
            let gram = basis.transpose() * &basis;
            let coef = gram.lu().solve(&(basis.transpose() * &eta)).unwrap_or_else(|| DVector::zeros(2));
            (&eta - &basis * coef).norm() / eta.norm().max(1e-300)
        };
        let kernel_defect = (0..total).into_par_iter().map(kernel).reduce(|| 0.0, f64::max);
        Ok(AlphaReport { form, residual, z_defect: zd, kernel_defect, min_denominator, grid_res })
    }

    /// Compares the Maurer-Cartan residual of `alpha_a` with a pointwise
    /// Frobenius test of `TL_a ∩ J TL_a` inside `L_a`.
    pub fn levi_flat_check(&self, a: &GraphFunction, tol: f64, grid_res: usize, cap: usize) -> Result<LeviFlatVerdict> {
        let alpha = self.alpha_of_graph(a, grid_res, cap)?;
        let az = project_z(&alpha.form, &self.couple)?;
        let (_, mc) = mc_residual(&az, &self.couple)?;
        let geometric = self.geometric_frobenius(a, grid_res)?;
        let algebraic_flat = mc <= tol;
        let geometric_flat = geometric <= tol;
        Ok(LeviFlatVerdict {
            mc_residual: mc,
            geometric_residual: geometric,
            algebraic_flat,
            geometric_flat,
            agree: algebraic_flat == geometric_flat,
            alpha,
        })
    }

    fn geometric_frobenius(&self, a: &GraphFunction, grid_res: usize) -> Result<f64> {
        let dom = self.ambient.domain();
        let shift = self.surface.extend(&self.effective_graph(a.a())?)?;
        let theta1 = &TrigForm::dx(dom, self.r.axis).scale_real(self.r.scale) - &ext_d(&shift);
        let theta2 = pullback_linear(&theta1, self.ambient.j().matrix());
        let sigma = wedge(&wedge(&theta1, &theta2)?, &ext_d(&theta2))?;
        if sigma.is_zero() {
            return Ok(0.0);
        }
        let res = grid_res.max(default_grid(sigma.bandwidth()));
        Ok(sup_norm_sq(&sigma, res)?.0.sqrt())
    }

    /// `(alpha_{tp} - alpha_{-tp}) / 2t` against `delta^c p` on the step ladder.
    /// Outside formal mode the graphs `t p` must be Levi-flat.
    pub fn deformation_derivative_check(
        &self,
        p: &TrigForm,
        t_steps: &[f64],
        formal: bool,
        grid_res: usize,
        cap: usize,
    ) -> Result<DeformationDerivativeReport> {
        if p.degree() != 0 {
            return Err(Error::DegreeMismatch { expected: 0, found: p.degree() });
        }
        let target = delta_c(p, &self.couple, &self.k)?;
        let tmax = t_steps.iter().copied().fold(0.0, f64::max);
        let levi_flat = self
            .levi_flat_check(&GraphFunction::with_default_radius(p.scale_real(tmax))?, 1e-8, grid_res, cap)?
            .algebraic_flat;
        if !formal && !levi_flat {
            return Err(Error::Precondition("the graphs t p are not Levi-flat; use formal mode".into()));
        }
        let mut rows = Vec::new();
        for &t in t_steps {
            let fwd = self.alpha_of_graph(&GraphFunction::with_default_radius(p.scale_real(t))?, grid_res, cap)?;
            let back = self.alpha_of_graph(&GraphFunction::with_default_radius(p.scale_real(-t))?, grid_res, cap)?;
            let fd = (&fwd.form - &back.form).scale_real(1.0 / (2.0 * t));
            rows.push(DerivativeRow {
                t,
                error: (&fd - &target).norm(),
                mirror_error: (&fd + &target).norm(),
                projection_residual: fwd.residual.max(back.residual),
            });
        }
        let orders = convergence_orders(&rows);
        let min_order = orders.iter().copied().fold(f64::INFINITY, f64::min);
        let ratios = rows.windows(2).map(|w| w[0].error / w[1].error).collect();
        Ok(DeformationDerivativeReport { target, rows, orders, min_order, ratios, formal, levi_flat })
    }

    /// [`eq_p_residual`] for this hypersurface.
    pub fn eq_p_residual(&self, p: &TrigForm) -> Result<EqPResidual> {
        eq_p_residual(p, &self.couple, &self.k)
    }

    /// `∫_L gamma ^ omega^{m-1}`.
    pub fn gamma_wedge_omega(&self) -> Result<f64> {
        gamma_wedge_omega(self.couple.gamma(), &self.surface.restrict(self.ambient.omega())?)
    }
}

/// `r1 = delta delta^c p` and
/// `rA = d_b d_b^c p - d_b p ^ J b - d_b^c p ^ b - p d_b(J b) - p b ^ J b`.
pub fn eq_p_residual(p: &TrigForm, c: &DefiningCouple, k: &LeafwiseJ) -> Result<EqPResidual> {
    if p.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: p.degree() });
    }
    let r1 = delta(&delta_c(p, c, k)?, c)?;
    let b = b_form(c);
    let jb = k.apply(&b);
    let dbp = d_b(p, c)?;
    let dbcp = d_b_c(p, c, k)?;
    let mut ra = d_b(&dbcp, c)?;
    ra.sub_assign(&wedge(&dbp, &jb)?);
    ra.sub_assign(&wedge(&dbcp, &b)?);
    ra.sub_assign(&d_b(&jb, c)?.mul_fn(p));
    ra.sub_assign(&wedge(&b, &jb)?.mul_fn(p));
    let identity_gap = (&r1 - &ra).norm();
    Ok(EqPResidual { r1_norm: r1.norm(), ra_norm: ra.norm(), r1, ra, identity_gap })
}

/// The leafwise equation on a compact leaf `F` with harmonic `b_F`:
/// `d d^c p - dp ^ J b_F - d^c p ^ b_F - p b_F ^ J b_F` and its complex form
/// `d' d'' p + d' p ^ conj(theta) - d'' p ^ theta - p conj(theta) ^ theta`
/// with `theta = (b_F + i J b_F) / 2`.
pub fn kahler_leaf_residual(p: &TrigForm, leaf: &LeafSpec, c: &DefiningCouple) -> Result<KahlerLeafResidual> {
    if p.degree() != 0 {
        return Err(Error::DegreeMismatch { expected: 0, found: p.degree() });
    }
    let j = leaf.complex()?;
    if leaf.restrict(c.gamma())?.norm() > 1e-10 {
        return Err(Error::Precondition("gamma does not vanish on the leaf".into()));
    }
    let b_f = harmonic_b_f(&b_form(c), leaf)?;
    let pf = leaf.restrict(p)?;
    let jb = apply_j(&b_f, j)?;
    let dp = ext_d(&pf);
    let dcp = -apply_j(&dp, j)?;
    let mut real = ext_d(&dcp);
    real.sub_assign(&wedge(&dp, &jb)?);
    real.sub_assign(&wedge(&dcp, &b_f)?);
    real.sub_assign(&wedge(&b_f, &jb)?.mul_fn(&pf));

    let i = C64::new(0.0, 1.0);
    let holo = |a: &TrigForm| -> Result<TrigForm> { Ok((a + &apply_j(a, j)?.scale(i)).scale_real(0.5)) };
    let anti = |a: &TrigForm| -> Result<TrigForm> { Ok((a - &apply_j(a, j)?.scale(i)).scale_real(0.5)) };
    let theta = holo(&b_f)?;
    let theta_bar = theta.conj();
    let dp1 = holo(&dp)?;
    let dp2 = anti(&dp)?;
    let mut complex = ext_d(&dp2);
    complex.add_assign(&wedge(&dp1, &theta_bar)?);
    complex.sub_assign(&wedge(&dp2, &theta)?);
    complex.sub_assign(&wedge(&theta_bar, &theta)?.mul_fn(&pf));
    let repackaging_gap = (&real + &complex.scale(C64::new(0.0, 2.0))).norm();

    let w = leaf.moment_weight(&b_f)?;
    let moment = pf.mul_fn(&w).mean_coeff(IndexSet::EMPTY).re * leaf.domain().sqrt_det();
    Ok(KahlerLeafResidual {
        real_norm: real.norm(),
        complex_norm: complex.norm(),
        real,
        complex,
        repackaging_gap,
        b_f,
        moment,
    })
}

/// `lambda` on the leaf with `b|_F + d lambda = b_F`, the harmonic part of `b|_F`.
pub fn rescale_witness(c: &DefiningCouple, leaf: &LeafSpec) -> Result<(TrigForm, TrigForm)> {
    let bf = leaf.restrict(&b_form(c))?;
    let parts = hodge_decompose(&bf);
    if parts.coexact.norm() > 1e-10 {
        return Err(Error::Precondition("b restricted to the leaf is not closed".into()));
    }
    let lambda = -crate::forms::codifferential(&crate::forms::green(&bf));
    Ok((lambda.real_part(), parts.harmonic))
}

/// The couple of `rho = e^{-lambda} r` with `lambda` from [`rescale_witness`]
/// extended constantly across the leaves: `(e^{-lambda} gamma, e^{lambda} X)`.
pub fn rescale_couple(c: &DefiningCouple, leaf: &LeafSpec) -> Result<RescaleReport> {
    let (lambda, b_f) = rescale_witness(c, leaf)?;
    let ext = leaf.extend(&lambda)?;
    let couple = psi_couple(c, &-&ext)?;
    let (_, tail) = exp_series(&ext)?;
    let achieved = leaf.restrict(&b_form(&couple))?;
    let residual = (&achieved - &b_f).norm();
    Ok(RescaleReport { couple, lambda, b_f, residual, series_tail: tail })
}

/// `rho = e^{-lambda} r` with `lambda` given on a leaf of `L` and extended
/// constantly across the leaves.
pub fn rescale_defining_function(
    r: &DefiningFunction,
    leaf: &LeafSpec,
    lambda: &TrigForm,
) -> Result<DefiningFunction> {
    let ext = leaf.extend(lambda)?;
    if ext.is_zero() {
        return Ok(r.clone());
    }
    r.clone().with_conformal(-&ext)
}

/// `∫_L gamma ^ omega^{m-1}` for a closed `gamma` on an odd-dimensional `L`.
pub fn gamma_wedge_omega(gamma: &TrigForm, omega: &TrigForm) -> Result<f64> {
    if gamma.degree() != 1 || omega.degree() != 2 {
        return Err(Error::Precondition("expected a 1-form and a 2-form".into()));
    }
    if **gamma.domain() != **omega.domain() {
        return Err(Error::DomainMismatch);
    }
    let n = gamma.dim();
    if n % 2 == 0 {
        return Err(Error::Precondition(format!("L has even dimension {n}")));
    }
    let dg = ext_d(gamma).norm();
    if dg > 1e-12 {
        return Err(Error::Precondition(format!("gamma is not closed (|d gamma| = {dg:e})")));
    }
    let mut top = gamma.clone();
    for _ in 0..(n - 1) / 2 {
        top = wedge(&top, omega)?;
    }
    Ok(integrate_top(&top)?.re)
}

/// Pointwise `<a, b>` of two forms of the same degree as a function.
pub(crate) fn pointwise_inner(a: &TrigForm, b: &TrigForm) -> Result<TrigForm> {
    Ok(hodge_star(&wedge(a, &hodge_star(b))?))
}
