//! The operator `P P^c` on functions of a flat Kähler leaf, `P = d + beta ^`,
//! restricted to the zero-moment subspace, with the identities its kernel
//! argument runs through.

use super::pointwise_inner;
use crate::error::{Error, Result};
use crate::forms::{
    apply_j, apply_j_any, codifferential, ext_d, hodge_star, l2_inner, sup_norm_sq, wedge, ComplexStructure,
    IndexSet, TrigForm, C64,
};
use crate::hodge::{first_positive, hodge_decompose, laplace_spectrum, LeafSpec, Space, SpectralOperator, SpectrumConstraint, TruncatedSpace};
use crate::linalg::{self, CMat, CVec, RANK_THRESHOLD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

const KERNEL_THRESHOLD: f64 = 1e-8;
const IDENTITY_SAMPLES: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct UniquenessReport {
    pub bandwidth: usize,
    /// Dimension of the zero-moment subspace.
    pub subspace_dim: usize,
    pub sigma_min: f64,
    /// Grid and envelope bounds on `sup |beta|^2`.
    pub beta_sup_sq: (f64, f64),
    pub lambda1: f64,
    /// Smallest eigenvalue of `|| df ||^2 - || f beta ||^2` on the subspace.
    pub quadratic_form_min: f64,
    /// `sup |beta|^2 < lambda1`, evaluated with the upper bound.
    pub criterion: bool,
    pub kernel_trivial: bool,
    /// The criterion implies a trivial kernel, or does not apply.
    pub consistent: bool,
    pub step1_defect: f64,
    pub adjoint_a_defect: f64,
    pub adjoint_b_defect: f64,
    pub adjoint_pc_defect: f64,
    pub pc_sharp_defect: f64,
    /// `| ||df|| - ||f beta|| |` over kernel vectors; `None` when the kernel is trivial.
    pub step4_defect: Option<f64>,
}

struct Ops<'a> {
    beta: &'a TrigForm,
    jbeta: TrigForm,
    j: &'a ComplexStructure,
}

impl Ops<'_> {
    /// `P = d + beta ^`.
    fn p(&self, a: &TrigForm) -> Result<TrigForm> {
        Ok(&ext_d(a) + &wedge(self.beta, a)?)
    }

    /// `P^c = J^{-1} P J` with `J` the algebra automorphism on all degrees.
    fn pc(&self, a: &TrigForm) -> Result<TrigForm> {
        let ja = apply_j_any(a, self.j)?;
        let inv = ComplexStructure::new(self.j.domain(), -self.j.matrix())?;
        apply_j_any(&self.p(&ja)?, &inv)
    }

    fn a_adj(&self, psi: &TrigForm) -> Result<TrigForm> {
        pointwise_inner(psi, self.beta)
    }

    fn b_adj(&self, psi: &TrigForm) -> Result<TrigForm> {
        pointwise_inner(psi, &self.jbeta)
    }

    /// `(P^c)^* psi = d^*(J psi) + A^*(J psi)` on 1-forms.
    fn pc_adj(&self, psi: &TrigForm) -> Result<TrigForm> {
        let jp = apply_j(psi, self.j)?;
        Ok(&codifferential(&jp) + &self.a_adj(&jp)?)
    }

    /// `(P^c)^# = - * P^c *`.
    fn pc_sharp(&self, psi: &TrigForm) -> Result<TrigForm> {
        Ok(-hodge_star(&self.pc(&hodge_star(psi))?))
    }
}

fn random_real(rng: &mut ChaCha8Rng, leaf: &LeafSpec, degree: usize, bw: i32) -> Result<TrigForm> {
    let dom = leaf.domain();
    let n = dom.dim();
    let basis = dom.basis(degree).to_vec();
    let mut terms = Vec::new();
    for _ in 0..6 {
        let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-bw..=bw)).collect();
        let s: IndexSet = basis[rng.gen_range(0..basis.len())];
        let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let neg: Vec<i32> = k.iter().map(|v| -v).collect();
        terms.push((k, s, c));
        terms.push((neg, s, c.conj()));
    }
    TrigForm::from_terms(dom, degree, terms)
}

/// Assembles `P P^c` on functions of bandwidth `bandwidth` on the zero-moment
/// subspace `{∫_F f beta ^ J beta ^ omega^{m-1} = 0}` and reports its smallest
/// singular value next to the sufficient criterion `sup |beta|^2 < lambda1`.
pub fn uniqueness_kernel_test(leaf: &LeafSpec, beta: &TrigForm, bandwidth: usize, seed: u64) -> Result<UniquenessReport> {
    let j = leaf.complex()?;
    if beta.degree() != 1 || **beta.domain() != **leaf.domain() {
        return Err(Error::Precondition("beta must be a 1-form on the leaf".into()));
    }
    if beta.norm() <= 1e-14 {
        return Err(Error::Precondition("beta must be nonzero".into()));
    }
    let parts = hodge_decompose(beta);
    if (beta - &parts.harmonic).norm() > 1e-12 {
        return Err(Error::Precondition("beta is not harmonic".into()));
    }
    let ops = Ops { beta, jbeta: apply_j(beta, j)?, j };
    let dom = leaf.domain();

    let src = TruncatedSpace::new(dom, Space::Full { degree: 0 }, bandwidth)?;
    let dst = TruncatedSpace::new(dom, Space::Full { degree: 2 }, bandwidth)?;
    let op = SpectralOperator::assemble(&src, &dst, |f| ops.p(&ops.pc(f)?))?;
    let dense = op.to_dense();
    let w = leaf.moment_weight(beta)?;
    let freqs = src.freqs().to_vec();
    let row = CMat::from_fn(1, freqs.len(), |_, i| {
        let neg: Vec<i32> = freqs[i].iter().map(|v| -v).collect();
        w.coeff(&neg, IndexSet::EMPTY)
    });
    let q = if w.is_zero() { CMat::identity(freqs.len(), freqs.len()) } else { linalg::null_space(&row, RANK_THRESHOLD) };
    let restricted = &dense * &q;
    let sv = linalg::singular_values(&restricted);
    let sigma_min = sv.iter().copied().fold(f64::INFINITY, f64::min);

    let beta_sup_sq = sup_norm_sq(beta, 9)?;
    let lambda1 = first_positive(&laplace_spectrum(leaf, 4, &SpectrumConstraint::Moment(w.clone()), bandwidth.max(1))?)
        .ok_or_else(|| Error::Numerical("no positive eigenvalue on the subspace".into()))?;
    let diag = CVec::from_iterator(
        freqs.len(),
        freqs.iter().map(|k| C64::new(dom.eigenvalue(k) - beta_sup_sq.1, 0.0)),
    );
    let quad = q.adjoint() * CMat::from_diagonal(&diag) * &q;
    let quadratic_form_min =
        linalg::hermitian_eigenvalues(&quad).into_iter().fold(f64::INFINITY, f64::min);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut step1 = 0.0f64;
    let mut adj_a = 0.0f64;
    let mut adj_b = 0.0f64;
    let mut adj_pc = 0.0f64;
    let mut sharp = 0.0f64;
    let omega = leaf.kahler_form()?;
    let bw = bandwidth.max(1) as i32;
    for _ in 0..IDENTITY_SAMPLES {
        let f = random_real(&mut rng, leaf, 0, bw)?;
        let psi = random_real(&mut rng, leaf, 1, bw)?;
        let pcf = ops.pc(&f)?;
        let lhs = pointwise_inner(&wedge(beta, &pcf)?, &omega)?;
        let rhs = pointwise_inner(&ops.jbeta, &pcf)?;
        step1 = step1.max((&lhs - &rhs).norm());

        let af = beta.mul_fn(&f);
        adj_a = adj_a.max((l2_inner(&af, &psi)? - l2_inner(&f, &ops.a_adj(&psi)?)?).norm());
        let bf = ops.jbeta.mul_fn(&f);
        adj_b = adj_b.max((l2_inner(&bf, &psi)? - l2_inner(&f, &ops.b_adj(&psi)?)?).norm());
        adj_pc = adj_pc.max((l2_inner(&pcf, &psi)? - l2_inner(&f, &ops.pc_adj(&psi)?)?).norm());

        let lhs = ops.pc_sharp(&psi)?;
        let rhs = &ops.pc_adj(&psi)? + &ops.b_adj(&psi)?.scale_real(2.0);
        sharp = sharp.max((&lhs - &rhs).norm());
    }

    let kernel_trivial = sigma_min > KERNEL_THRESHOLD;
    let step4_defect = if kernel_trivial {
        None
    } else {
        let ns = linalg::null_space(&restricted, KERNEL_THRESHOLD);
        let mut worst = 0.0f64;
        for col in 0..ns.ncols() {
            let v = &q * ns.column(col);
            let f = src.form(&v);
            let df = l2_inner(&ext_d(&f), &ext_d(&f))?.re.sqrt();
            let fb = beta.mul_fn(&f);
            let nb = l2_inner(&fb, &fb)?.re.sqrt();
            worst = worst.max((df - nb).abs());
        }
        Some(worst)
    };
    let criterion = beta_sup_sq.1 < lambda1;
    Ok(UniquenessReport {
        bandwidth,
        subspace_dim: q.ncols(),
        sigma_min,
        beta_sup_sq,
        lambda1,
        quadratic_form_min,
        criterion,
        kernel_trivial,
        consistent: !criterion || kernel_trivial,
        step1_defect: step1,
        adjoint_a_defect: adj_a,
        adjoint_b_defect: adj_b,
        adjoint_pc_defect: adj_pc,
        pc_sharp_defect: sharp,
        step4_defect,
    })
}
