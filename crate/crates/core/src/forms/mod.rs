//! Trigonometric-polynomial differential forms on flat tori.
//!
//! A form of degree `p` on `T^n = R^n / Z^n` is stored as a finite map
//! `(k, I) -> c` standing for `sum c e^{2 pi i <k,x>} dx_I`. All exterior
//! operations act exactly on these coefficients; only [`divide_pointwise`]
//! and [`pullback_graph`] go through a sampling grid.

mod domain;
mod grid;
mod serial;

pub use domain::{ComplexStructure, Domain, FlatTorusDomain, IndexSet};
pub use grid::{
    divide_pointwise_with, PointMap,
    default_grid, divide_pointwise, eval_form, grid_point, project, pullback_graph, sample,
    sample_field, PullbackReport, TorusMap, DEFAULT_DENOMINATOR_THRESHOLD,
};
pub use serial::{DomainLiteral, FormLiteral, TermLiteral};

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

pub type C64 = Complex64;
pub type Freq = Vec<i32>;

const TWO_PI_I: C64 = C64::new(0.0, 2.0 * PI);

/// A differential form with finitely many Fourier modes.
#[derive(Clone, Debug)]
pub struct TrigForm {
    domain: Domain,
    degree: usize,
    terms: BTreeMap<(Freq, IndexSet), C64>,
}

/// A vector field whose contravariant components are trigonometric functions.
#[derive(Clone, Debug)]
pub struct VectorField {
    domain: Domain,
    comps: Vec<TrigForm>,
}

fn same_domain(a: &Domain, b: &Domain) -> bool {
    Arc::ptr_eq(a, b) || **a == **b
}

fn parity(count: u32) -> f64 {
    if count % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

fn add_freq(a: &[i32], b: &[i32]) -> Freq {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

impl TrigForm {
    pub fn zero(domain: &Domain, degree: usize) -> Self {
        TrigForm { domain: domain.clone(), degree, terms: BTreeMap::new() }
    }

    pub fn constant(domain: &Domain, c: f64) -> Self {
        Self::constant_complex(domain, C64::new(c, 0.0))
    }

    pub fn constant_complex(domain: &Domain, c: C64) -> Self {
        let mut f = Self::zero(domain, 0);
        f.accumulate(&vec![0; domain.dim()], IndexSet::EMPTY, c);
        f
    }

    /// `c e^{2 pi i <k,x>} dx_{axes}`; axes are 0-based and may come in any order,
    /// the sign of the reordering is applied.
    pub fn monomial(domain: &Domain, k: &[i32], axes: &[usize], c: C64) -> Result<Self> {
        let n = domain.dim();
        if k.len() != n {
            return Err(Error::InvalidTerm(format!("frequency has length {} on a {n}-torus", k.len())));
        }
        let (set, sign) = IndexSet::from_unordered(axes, n)?;
        let mut f = Self::zero(domain, axes.len());
        f.accumulate(k, set, c * sign);
        Ok(f)
    }

    /// The coordinate 1-form `dx_axis`.
    pub fn dx(domain: &Domain, axis: usize) -> Self {
        let mut f = Self::zero(domain, 1);
        f.accumulate(&vec![0; domain.dim()], IndexSet::single(axis), C64::new(1.0, 0.0));
        f
    }

    /// `amp cos(2 pi <k,x>) dx_axes` as a pair of exponential modes.
    pub fn cos_mode(domain: &Domain, k: &[i32], axes: &[usize], amp: f64) -> Result<Self> {
        let neg: Freq = k.iter().map(|v| -v).collect();
        let half = C64::new(amp / 2.0, 0.0);
        let mut f = Self::monomial(domain, k, axes, half)?;
        f.add_assign(&Self::monomial(domain, &neg, axes, half)?);
        Ok(f)
    }

    /// `amp sin(2 pi <k,x>) dx_axes` as a pair of exponential modes.
    pub fn sin_mode(domain: &Domain, k: &[i32], axes: &[usize], amp: f64) -> Result<Self> {
        let neg: Freq = k.iter().map(|v| -v).collect();
        let mut f = Self::monomial(domain, k, axes, C64::new(0.0, -amp / 2.0))?;
        f.add_assign(&Self::monomial(domain, &neg, axes, C64::new(0.0, amp / 2.0))?);
        Ok(f)
    }

    /// Builds a form from raw terms; duplicate keys are summed.
    pub fn from_terms<I>(domain: &Domain, degree: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Freq, IndexSet, C64)>,
    {
        let n = domain.dim();
        if degree > n + 1 {
            return Err(Error::InvalidTerm(format!("degree {degree} on a {n}-torus")));
        }
        let mut f = Self::zero(domain, degree);
        for (k, set, c) in terms {
            if k.len() != n {
                return Err(Error::InvalidTerm(format!("frequency {k:?} on a {n}-torus")));
            }
            if set.len() != degree || set.max_axis().map_or(false, |a| a >= n) {
                return Err(Error::InvalidTerm(format!("index set {:?} for degree {degree}", set.axes())));
            }
            f.accumulate(&k, set, c);
        }
        Ok(f)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Freq, IndexSet, C64)> + '_ {
        self.terms.iter().map(|((k, s), c)| (k, *s, *c))
    }

    pub fn coeff(&self, k: &[i32], set: IndexSet) -> C64 {
        self.terms.get(&(k.to_vec(), set)).copied().unwrap_or_default()
    }

    /// Coefficient of the constant mode on `dx_set`.
    pub fn mean_coeff(&self, set: IndexSet) -> C64 {
        self.coeff(&vec![0; self.dim()], set)
    }

    /// Largest `|k_i|` over all stored modes.
    pub fn bandwidth(&self) -> usize {
        self.terms.keys().flat_map(|(k, _)| k.iter().map(|v| v.unsigned_abs() as usize)).max().unwrap_or(0)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Distinct frequencies carrying at least one term, in ascending order.
    pub fn frequencies(&self) -> Vec<Freq> {
        let mut out: Vec<Freq> = Vec::new();
        for (k, _) in self.terms.keys() {
            if out.last() != Some(k) {
                out.push(k.clone());
            }
        }
        out
    }

    /// Coefficient vector at frequency `k` in the ordered basis of `degree`-covectors.
    pub fn block(&self, k: &[i32]) -> Vec<C64> {
        let basis = self.domain.basis(self.degree);
        basis.iter().map(|s| self.coeff(k, *s)).collect()
    }

    pub(crate) fn accumulate(&mut self, k: &[i32], set: IndexSet, c: C64) {
        if c == C64::new(0.0, 0.0) {
            return;
        }
        let key = (k.to_vec(), set);
        let entry = self.terms.entry(key);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                v.insert(c);
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let v = *o.get() + c;
                if v == C64::new(0.0, 0.0) {
                    o.remove();
                } else {
                    *o.get_mut() = v;
                }
            }
        }
    }

    fn assert_compatible(&self, other: &TrigForm) {
        assert!(same_domain(&self.domain, &other.domain), "forms live on different domains");
        assert_eq!(self.degree, other.degree, "forms have different degrees");
    }

    /// Sum, checked for domain and degree.
    pub fn checked_add(&self, other: &TrigForm) -> Result<TrigForm> {
        if !same_domain(&self.domain, &other.domain) {
            return Err(Error::DomainMismatch);
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch { expected: self.degree, found: other.degree });
        }
        let mut out = self.clone();
        out.add_assign(other);
        Ok(out)
    }

    pub fn add_assign(&mut self, other: &TrigForm) {
        self.assert_compatible(other);
        for ((k, s), c) in &other.terms {
            self.accumulate(k, *s, *c);
        }
    }

    pub fn sub_assign(&mut self, other: &TrigForm) {
        self.assert_compatible(other);
        for ((k, s), c) in &other.terms {
            self.accumulate(k, *s, -*c);
        }
    }

    pub fn scale(&self, c: C64) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        if c != C64::new(0.0, 0.0) {
            for (key, v) in &self.terms {
                out.terms.insert(key.clone(), v * c);
            }
        }
        out
    }

    pub fn scale_real(&self, c: f64) -> TrigForm {
        self.scale(C64::new(c, 0.0))
    }

    /// Complex conjugate form (frequency `k -> -k`, coefficients conjugated).
    pub fn conj(&self) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        for ((k, s), c) in &self.terms {
            let neg: Freq = k.iter().map(|v| -v).collect();
            out.accumulate(&neg, *s, c.conj());
        }
        out
    }

    /// Whether `c_{-k,I} = conj(c_{k,I})` holds for every stored term.
    pub fn is_real(&self, tol: f64) -> bool {
        self.terms.iter().all(|((k, s), c)| {
            let neg: Freq = k.iter().map(|v| -v).collect();
            (self.coeff(&neg, *s) - c.conj()).norm() <= tol
        })
    }

    /// Real part `(a + conj a) / 2` of the represented function-valued form.
    pub fn real_part(&self) -> TrigForm {
        let mut out = self.clone();
        out.add_assign(&self.conj());
        out.scale_real(0.5)
    }

    /// Drops coefficients with modulus `<= tol`.
    pub fn chop(&self, tol: f64) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        for (key, c) in &self.terms {
            if c.norm() > tol {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// Keeps only modes with `max |k_i| <= cap`.
    pub fn truncate(&self, cap: usize) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        for (key, c) in &self.terms {
            if key.0.iter().all(|v| v.unsigned_abs() as usize <= cap) {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// Keeps the terms accepted by `keep`.
    pub fn filter<F: Fn(&[i32], IndexSet) -> bool>(&self, keep: F) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        for (key, c) in &self.terms {
            if keep(&key.0, key.1) {
                out.terms.insert(key.clone(), *c);
            }
        }
        out
    }

    /// Multiplication by a 0-form.
    pub fn mul_fn(&self, f: &TrigForm) -> TrigForm {
        assert_eq!(f.degree, 0, "mul_fn expects a 0-form");
        wedge(f, self).expect("multiplying by a function cannot overflow")
    }

    /// Coefficientwise partial derivative along `axis`.
    pub fn partial(&self, axis: usize) -> TrigForm {
        let mut out = TrigForm::zero(&self.domain, self.degree);
        for ((k, s), c) in &self.terms {
            out.accumulate(k, *s, TWO_PI_I * k[axis] as f64 * c);
        }
        out
    }

    /// L2 norm `sqrt <<a, a>>`.
    pub fn norm(&self) -> f64 {
        l2_inner(self, self).map(|v| v.re.max(0.0).sqrt()).unwrap_or(0.0)
    }

    /// Evaluates the coefficient vector (ordered basis of the degree) at a point.
    pub fn eval(&self, x: &[f64]) -> Vec<C64> {
        let basis = self.domain.basis(self.degree);
        let mut out = vec![C64::new(0.0, 0.0); basis.len()];
        for ((k, s), c) in &self.terms {
            let phase: f64 = k.iter().zip(x).map(|(a, b)| *a as f64 * b).sum();
            let e = C64::from_polar(1.0, 2.0 * PI * phase);
            out[self.domain.basis_position(*s)] += c * e;
        }
        out
    }

    /// Re-expresses the form on an equal domain object.
    pub fn with_domain(&self, domain: &Domain) -> Result<TrigForm> {
        if !same_domain(&self.domain, domain) {
            return Err(Error::DomainMismatch);
        }
        Ok(TrigForm { domain: domain.clone(), degree: self.degree, terms: self.terms.clone() })
    }

    /// Max coefficient distance to `other`.
    pub fn distance(&self, other: &TrigForm) -> f64 {
        let mut diff = self.clone();
        diff.sub_assign(other);
        diff.max_abs()
    }
}

impl PartialEq for TrigForm {
    fn eq(&self, other: &Self) -> bool {
        same_domain(&self.domain, &other.domain) && self.degree == other.degree && self.terms == other.terms
    }
}

macro_rules! binop {
    ($tr:ident, $m:ident, $assign:ident) => {
        impl std::ops::$tr<&TrigForm> for &TrigForm {
            type Output = TrigForm;
            fn $m(self, rhs: &TrigForm) -> TrigForm {
                let mut out = self.clone();
                out.$assign(rhs);
                out
            }
        }
        impl std::ops::$tr<TrigForm> for TrigForm {
            type Output = TrigForm;
            fn $m(mut self, rhs: TrigForm) -> TrigForm {
                self.$assign(&rhs);
                self
            }
        }
        impl std::ops::$tr<&TrigForm> for TrigForm {
            type Output = TrigForm;
            fn $m(mut self, rhs: &TrigForm) -> TrigForm {
                self.$assign(rhs);
                self
            }
        }
    };
}
binop!(Add, add, add_assign);
binop!(Sub, sub, sub_assign);

impl std::ops::Neg for &TrigForm {
    type Output = TrigForm;
    fn neg(self) -> TrigForm {
        self.scale_real(-1.0)
    }
}

impl std::ops::Neg for TrigForm {
    type Output = TrigForm;
    fn neg(self) -> TrigForm {
        self.scale_real(-1.0)
    }
}

impl std::ops::Mul<f64> for &TrigForm {
    type Output = TrigForm;
    fn mul(self, rhs: f64) -> TrigForm {
        self.scale_real(rhs)
    }
}

impl std::ops::Mul<C64> for &TrigForm {
    type Output = TrigForm;
    fn mul(self, rhs: C64) -> TrigForm {
        self.scale(rhs)
    }
}

impl VectorField {
    pub fn new(comps: Vec<TrigForm>) -> Result<Self> {
        let first = comps.first().ok_or_else(|| Error::InvalidTerm("empty vector field".into()))?;
        let domain = first.domain.clone();
        if comps.len() != domain.dim() {
            return Err(Error::InvalidTerm(format!(
                "{} components on a {}-torus",
                comps.len(),
                domain.dim()
            )));
        }
        for c in &comps {
            if !same_domain(&c.domain, &domain) {
                return Err(Error::DomainMismatch);
            }
            if c.degree != 0 {
                return Err(Error::DegreeMismatch { expected: 0, found: c.degree });
            }
        }
        Ok(VectorField { domain, comps })
    }

    pub fn zero(domain: &Domain) -> Self {
        VectorField { domain: domain.clone(), comps: vec![TrigForm::zero(domain, 0); domain.dim()] }
    }

    pub fn constant(domain: &Domain, v: &[f64]) -> Self {
        assert_eq!(v.len(), domain.dim());
        VectorField { domain: domain.clone(), comps: v.iter().map(|c| TrigForm::constant(domain, *c)).collect() }
    }

    /// The coordinate field `d/dx_axis`.
    pub fn coordinate(domain: &Domain, axis: usize) -> Self {
        let mut v = vec![0.0; domain.dim()];
        v[axis] = 1.0;
        Self::constant(domain, &v)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn component(&self, i: usize) -> &TrigForm {
        &self.comps[i]
    }

    pub fn components(&self) -> &[TrigForm] {
        &self.comps
    }

    pub fn scale_fn(&self, f: &TrigForm) -> VectorField {
        VectorField { domain: self.domain.clone(), comps: self.comps.iter().map(|c| c.mul_fn(f)).collect() }
    }

    pub fn scale_real(&self, c: f64) -> VectorField {
        VectorField { domain: self.domain.clone(), comps: self.comps.iter().map(|x| x.scale_real(c)).collect() }
    }

    pub fn add(&self, other: &VectorField) -> VectorField {
        VectorField {
            domain: self.domain.clone(),
            comps: self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn bandwidth(&self) -> usize {
        self.comps.iter().map(|c| c.bandwidth()).max().unwrap_or(0)
    }

    /// Whether every component is a constant function.
    pub fn is_constant(&self) -> bool {
        let zero = vec![0; self.domain.dim()];
        self.comps.iter().all(|c| c.terms.keys().all(|(k, _)| *k == zero))
    }

    /// Evaluates the components at a point.
    pub fn eval(&self, x: &[f64]) -> Vec<C64> {
        self.comps.iter().map(|c| c.eval(x)[0]).collect()
    }

    pub fn chop(&self, tol: f64) -> VectorField {
        VectorField { domain: self.domain.clone(), comps: self.comps.iter().map(|c| c.chop(tol)).collect() }
    }
}

/// Exterior product; errors when the degrees add past the dimension.
pub fn wedge(a: &TrigForm, b: &TrigForm) -> Result<TrigForm> {
    if !same_domain(&a.domain, &b.domain) {
        return Err(Error::DomainMismatch);
    }
    let n = a.dim();
    if a.degree + b.degree > n {
        return Err(Error::DegreeOverflow { left: a.degree, right: b.degree, dim: n });
    }
    let mut acc: std::collections::HashMap<(Freq, IndexSet), C64> =
        std::collections::HashMap::with_capacity(a.terms.len() * b.terms.len());
    for ((ka, sa), ca) in &a.terms {
        for ((kb, sb), cb) in &b.terms {
            if let Some((s, sign)) = sa.wedge(*sb) {
                *acc.entry((add_freq(ka, kb), s)).or_insert(C64::new(0.0, 0.0)) += ca * cb * sign;
            }
        }
    }
    let mut out = TrigForm::zero(&a.domain, a.degree + b.degree);
    out.terms = acc.into_iter().filter(|(_, c)| *c != C64::new(0.0, 0.0)).collect();
    Ok(out)
}

/// Exterior derivative; a top-degree input yields the empty form of degree `n + 1`.
pub fn ext_d(a: &TrigForm) -> TrigForm {
    let n = a.dim();
    let mut out = TrigForm::zero(&a.domain, a.degree + 1);
    if a.degree >= n {
        return out;
    }
    for ((k, s), c) in &a.terms {
        for (j, kj) in k.iter().enumerate() {
            if *kj == 0 || s.contains(j) {
                continue;
            }
            let sign = parity(s.count_below(j));
            out.accumulate(k, s.insert(j), TWO_PI_I * (*kj as f64) * c * sign);
        }
    }
    out
}

/// Interior product `i_X a`; contracting a 0-form is an error.
pub fn interior(x: &VectorField, a: &TrigForm) -> Result<TrigForm> {
    if !same_domain(&x.domain, &a.domain) {
        return Err(Error::DomainMismatch);
    }
    if a.degree == 0 {
        return Err(Error::UnsupportedDegree { op: "interior", degree: 0 });
    }
    let mut out = TrigForm::zero(&a.domain, a.degree - 1);
    for ((k, s), c) in &a.terms {
        for j in s.axes() {
            let sign = parity(s.count_below(j));
            let rest = s.remove(j);
            for ((kx, _), cx) in &x.comps[j].terms {
                out.accumulate(&add_freq(k, kx), rest, c * cx * sign);
            }
        }
    }
    Ok(out)
}

/// `i_X a`, or zero of degree 0 when `a` is a function.
pub(crate) fn contract(x: &VectorField, a: &TrigForm) -> TrigForm {
    if a.degree == 0 {
        TrigForm::zero(&a.domain, 0)
    } else {
        interior(x, a).expect("domains checked by caller")
    }
}

/// Lie derivative by Cartan's formula.
pub fn lie_derivative(x: &VectorField, a: &TrigForm) -> Result<TrigForm> {
    if !same_domain(&x.domain, &a.domain) {
        return Err(Error::DomainMismatch);
    }
    let mut out = contract(x, &ext_d(a));
    if a.degree > 0 {
        out.add_assign(&ext_d(&interior(x, a)?));
    }
    Ok(out)
}

/// Hodge star of the constant metric and orientation.
pub fn hodge_star(a: &TrigForm) -> TrigForm {
    let dom = &a.domain;
    let n = dom.dim();
    let p = a.degree.min(n);
    let mut out = TrigForm::zero(dom, n - p);
    if a.degree > n {
        return out;
    }
    let star = dom.star_matrix(p);
    let targets = dom.basis(n - p);
    for ((k, s), c) in &a.terms {
        let col = dom.basis_position(*s);
        for (row, t) in targets.iter().enumerate() {
            let m = star[(row, col)];
            if m != 0.0 {
                out.accumulate(k, *t, c * m);
            }
        }
    }
    out
}

/// `<<a, b>> = integral of a ^ *conj(b)`, evaluated exactly by Parseval.
pub fn l2_inner(a: &TrigForm, b: &TrigForm) -> Result<C64> {
    if !same_domain(&a.domain, &b.domain) {
        return Err(Error::DomainMismatch);
    }
    if a.degree != b.degree {
        return Err(Error::DegreeMismatch { expected: a.degree, found: b.degree });
    }
    let dom = &a.domain;
    if a.degree > dom.dim() {
        return Ok(C64::new(0.0, 0.0));
    }
    let gram = dom.gram(a.degree);
    let mut acc = C64::new(0.0, 0.0);
    for ((k, s), ca) in &a.terms {
        let i = dom.basis_position(*s);
        let lo = (k.clone(), IndexSet::EMPTY);
        let hi = (k.clone(), IndexSet::FULL);
        for ((_, t), cb) in b.terms.range(lo..=hi) {
            let g = gram[(i, dom.basis_position(*t))];
            if g != 0.0 {
                acc += ca * cb.conj() * g;
            }
        }
    }
    Ok(acc * dom.sqrt_det())
}

/// Bounds `(lower, upper)` on `sup_x <a, a>(x)`: the grid maximum and the
/// squared l1 envelope of the per-frequency coefficient norms.
pub fn sup_norm_sq(a: &TrigForm, grid_res: usize) -> Result<(f64, f64)> {
    if a.is_zero() {
        return Ok((0.0, 0.0));
    }
    let bw = a.bandwidth();
    if grid_res < 2 * bw + 1 {
        return Err(Error::GridTooCoarse { grid: grid_res, bandwidth: bw });
    }
    let dom = &a.domain;
    let gram = dom.gram(a.degree);
    let comps = sample(a, grid_res)?;
    let points = comps[0].len();
    let dimb = comps.len();
    let mut lower = 0.0f64;
    for p in 0..points {
        let mut v = 0.0;
        for i in 0..dimb {
            for j in 0..dimb {
                let g = gram[(i, j)];
                if g != 0.0 {
                    v += (comps[i][p] * comps[j][p].conj()).re * g;
                }
            }
        }
        lower = lower.max(v);
    }
    let mut envelope = 0.0;
    for k in a.frequencies() {
        let blk = a.block(&k);
        let mut q = 0.0;
        for i in 0..dimb {
            for j in 0..dimb {
                q += (blk[i] * blk[j].conj()).re * gram[(i, j)];
            }
        }
        envelope += q.max(0.0).sqrt();
    }
    let upper = (envelope * envelope).max(lower);
    Ok((lower, upper))
}

/// Integral of a top-degree form over the torus with its orientation.
pub fn integrate_top(a: &TrigForm) -> Result<C64> {
    let n = a.dim();
    if a.degree != n {
        return Err(Error::DegreeMismatch { expected: n, found: a.degree });
    }
    Ok(a.mean_coeff(IndexSet::all(n)) * a.domain.orientation() as f64)
}

/// `J` on forms of degree 0 (identity) and 1 (`(J a)(V) = -a(J V)`).
pub fn apply_j(a: &TrigForm, j: &ComplexStructure) -> Result<TrigForm> {
    if !same_domain(&a.domain, j.domain()) {
        return Err(Error::DomainMismatch);
    }
    match a.degree {
        0 => Ok(a.clone()),
        1 => Ok(pullback_linear(a, &(-j.matrix()))),
        d => Err(Error::UnsupportedDegree { op: "apply_j", degree: d }),
    }
}

/// `J` extended to every degree as the algebra automorphism
/// `(J a)(V_1, .., V_p) = a(J^{-1} V_1, .., J^{-1} V_p)`.
pub fn apply_j_any(a: &TrigForm, j: &ComplexStructure) -> Result<TrigForm> {
    if !same_domain(&a.domain, j.domain()) {
        return Err(Error::DomainMismatch);
    }
    Ok(pullback_linear(a, &(-j.matrix())))
}

/// `(J X)^i = sum_j J_ij X^j`.
pub fn apply_j_field(x: &VectorField, j: &ComplexStructure) -> Result<VectorField> {
    if !same_domain(&x.domain, j.domain()) {
        return Err(Error::DomainMismatch);
    }
    let n = x.domain.dim();
    let m = j.matrix();
    let comps = (0..n)
        .map(|i| {
            let mut c = TrigForm::zero(&x.domain, 0);
            for k in 0..n {
                if m[(i, k)] != 0.0 {
                    c.add_assign(&x.comps[k].scale_real(m[(i, k)]));
                }
            }
            c
        })
        .collect();
    Ok(VectorField { domain: x.domain.clone(), comps })
}

/// Pullback of the coefficients under a constant linear map `A`:
/// `(A^* a)(V_1, ..) = a(A V_1, ..)`; frequencies are left untouched.
pub fn pullback_linear(a: &TrigForm, m: &DMatrix<f64>) -> TrigForm {
    let dom = &a.domain;
    let mut out = TrigForm::zero(dom, a.degree);
    if a.degree > dom.dim() {
        return out;
    }
    let targets = dom.basis(a.degree);
    for ((k, s), c) in &a.terms {
        for t in targets {
            let minor = domain::minor(m, *s, *t);
            if minor != 0.0 {
                out.accumulate(k, *t, c * minor);
            }
        }
    }
    out
}

/// Flat Hodge Laplacian: multiplies the mode `k` by `4 pi^2 k^T G^{-1} k`.
pub fn laplacian(a: &TrigForm) -> TrigForm {
    let mut out = TrigForm::zero(&a.domain, a.degree);
    for ((k, s), c) in &a.terms {
        out.accumulate(k, *s, c * a.domain.eigenvalue(k));
    }
    out
}

/// Formal adjoint of `d`: `(-1)^{n(p+1)+1} * d *` on `p`-forms.
pub fn codifferential(a: &TrigForm) -> TrigForm {
    let n = a.dim();
    if a.degree == 0 {
        return TrigForm::zero(&a.domain, 0);
    }
    let p = a.degree;
    let sign = parity((n * (p + 1) + 1) as u32);
    hodge_star(&ext_d(&hodge_star(a))).scale_real(sign)
}

/// Inverse of the flat Laplacian on nonzero modes; the constant mode is dropped.
pub fn green(a: &TrigForm) -> TrigForm {
    let mut out = TrigForm::zero(&a.domain, a.degree);
    for ((k, s), c) in &a.terms {
        let ev = a.domain.eigenvalue(k);
        if ev > 0.0 {
            out.accumulate(k, *s, c / ev);
        }
    }
    out
}
