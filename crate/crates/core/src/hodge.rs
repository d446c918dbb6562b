//! Truncated Fourier spaces, block assembly of linear operators on forms,
//! cohomology ranks, Hodge decomposition on flat tori and Laplace spectra of leaves.

use crate::error::{Error, Result};
use crate::forms::{
    codifferential, ext_d, green, hodge_star, wedge, ComplexStructure, Domain, FlatTorusDomain, Freq, IndexSet,
    TrigForm, C64,
};
use crate::linalg::{self, CMat, CVec, RANK_THRESHOLD};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

/// Which subspace of `p`-covectors a truncated space uses at every frequency.
#[derive(Clone, Debug, PartialEq)]
pub enum Space {
    /// All `p`-covectors.
    Full { degree: usize },
    /// Covectors annihilated by contraction with the constant direction `v`.
    Z { degree: usize, direction: Vec<f64> },
}

impl Space {
    pub fn degree(&self) -> usize {
        match self {
            Space::Full { degree } | Space::Z { degree, .. } => *degree,
        }
    }
}

/// Forms with `max |k_i| <= bandwidth` whose covector part at every frequency lies in a fixed subspace.
#[derive(Clone, Debug)]
pub struct TruncatedSpace {
    domain: Domain,
    space: Space,
    bandwidth: usize,
    freqs: Vec<Freq>,
    /// Lookup for spaces with an explicit frequency support.
    index: Option<std::collections::BTreeMap<Freq, usize>>,
    /// Orthonormal columns in the coefficient space of the ordered `p`-covector basis.
    basis: CMat,
}

fn freq_box(n: usize, b: usize) -> Vec<Freq> {
    let side = 2 * b + 1;
    let total = side.pow(n as u32);
    (0..total)
        .map(|mut idx| {
            let mut k = vec![0i32; n];
            for axis in (0..n).rev() {
                k[axis] = (idx % side) as i32 - b as i32;
                idx /= side;
            }
            k
        })
        .collect()
}

fn contraction_matrix(domain: &FlatTorusDomain, degree: usize, v: &[f64]) -> DMatrix<f64> {
    let src = domain.basis(degree);
    let dst = domain.basis(degree - 1);
    let mut m = DMatrix::zeros(dst.len(), src.len());
    for (col, s) in src.iter().enumerate() {
        for j in s.axes() {
            let sign = if s.count_below(j) % 2 == 0 { 1.0 } else { -1.0 };
            m[(domain.basis_position(s.remove(j)), col)] += sign * v[j];
        }
    }
    m
}

fn z_basis(domain: &FlatTorusDomain, degree: usize, v: &[f64]) -> CMat {
    let nb = domain.basis(degree).len();
    if degree == 0 {
        return CMat::identity(1, 1);
    }
    let nonzero: Vec<usize> = (0..v.len()).filter(|i| v[*i] != 0.0).collect();
    if nonzero.len() == 1 {
        let axis = nonzero[0];
        let cols: Vec<usize> = (0..nb).filter(|i| !domain.basis(degree)[*i].contains(axis)).collect();
        return CMat::from_fn(nb, cols.len(), |r, c| C64::new(f64::from(u8::from(r == cols[c])), 0.0));
    }
    let m = contraction_matrix(domain, degree, v).map(|x| C64::new(x, 0.0));
    linalg::null_space(&m, 1e-12)
}

impl TruncatedSpace {
    pub fn new(domain: &Domain, space: Space, bandwidth: usize) -> Result<Self> {
        let n = domain.dim();
        let degree = space.degree();
        if degree > n {
            return Err(Error::UnsupportedDegree { op: "truncated space", degree });
        }
        let basis = match &space {
            Space::Full { .. } => CMat::identity(domain.basis(degree).len(), domain.basis(degree).len()),
            Space::Z { direction, .. } => {
                if direction.len() != n || direction.iter().all(|x| *x == 0.0) {
                    return Err(Error::InvalidCouple("Z-space direction must be a nonzero n-vector".into()));
                }
                z_basis(domain, degree, direction)
            }
        };
        Ok(TruncatedSpace { domain: domain.clone(), space, bandwidth, freqs: freq_box(n, bandwidth), index: None, basis })
    }

    /// Same covector subspace restricted to an explicit set of frequencies.
    pub fn with_support(domain: &Domain, space: Space, support: impl IntoIterator<Item = Freq>) -> Result<Self> {
        let mut s = Self::new(domain, space, 0)?;
        let set: std::collections::BTreeSet<Freq> = support.into_iter().collect();
        if let Some(k) = set.iter().find(|k| k.len() != domain.dim()) {
            return Err(Error::InvalidTerm(format!("frequency {k:?} has the wrong length")));
        }
        s.freqs = set.into_iter().collect();
        s.bandwidth = s.freqs.iter().flatten().map(|v| v.unsigned_abs() as usize).max().unwrap_or(0);
        s.index = Some(s.freqs.iter().enumerate().map(|(i, k)| (k.clone(), i)).collect());
        Ok(s)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn space(&self) -> &Space {
        &self.space
    }

    pub fn degree(&self) -> usize {
        self.space.degree()
    }

    pub fn bandwidth(&self) -> usize {
        self.bandwidth
    }

    pub fn freqs(&self) -> &[Freq] {
        &self.freqs
    }

    /// Dimension of the covector subspace at one frequency.
    pub fn block_dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn dim(&self) -> usize {
        self.block_dim() * self.freqs.len()
    }

    pub fn covector_basis(&self) -> &CMat {
        &self.basis
    }

    /// Position of `k` in the frequency list, if it lies in the box.
    pub fn freq_index(&self, k: &[i32]) -> Option<usize> {
        if let Some(index) = &self.index {
            return index.get(k).copied();
        }
        let side = 2 * self.bandwidth as i32 + 1;
        let mut idx = 0usize;
        for v in k {
            if v.unsigned_abs() as usize > self.bandwidth {
                return None;
            }
            idx = idx * side as usize + (v + self.bandwidth as i32) as usize;
        }
        Some(idx)
    }

    /// The form at frequency `freqs[fi]` with local coordinates `local`.
    pub fn block_form(&self, fi: usize, local: &[C64]) -> TrigForm {
        let k = &self.freqs[fi];
        let sets = self.domain.basis(self.degree());
        let mut terms = Vec::new();
        for (row, set) in sets.iter().enumerate() {
            let c: C64 = (0..self.block_dim()).map(|j| self.basis[(row, j)] * local[j]).sum();
            terms.push((k.clone(), *set, c));
        }
        TrigForm::from_terms(&self.domain, self.degree(), terms).expect("basis terms are valid")
    }

    pub fn form(&self, v: &CVec) -> TrigForm {
        let bd = self.block_dim();
        let mut out = TrigForm::zero(&self.domain, self.degree());
        for fi in 0..self.freqs.len() {
            let local: Vec<C64> = (0..bd).map(|j| v[fi * bd + j]).collect();
            if local.iter().any(|c| c.norm() != 0.0) {
                out.add_assign(&self.block_form(fi, &local));
            }
        }
        out
    }

    fn local_coords(&self, coeffs: &[C64]) -> Result<Vec<C64>> {
        let c = CVec::from_column_slice(coeffs);
        let local = self.basis.adjoint() * &c;
        let defect = (&c - &self.basis * &local).norm();
        if defect > 1e-9 * (1.0 + c.norm()) {
            return Err(Error::NotInZ(defect));
        }
        Ok(local.iter().copied().collect())
    }

    /// Coordinates of `a`; modes outside the box are an error naming the frequency.
    pub fn coords(&self, a: &TrigForm) -> Result<CVec> {
        self.coords_mode(a, false)
    }

    fn coords_mode(&self, a: &TrigForm, drop_spill: bool) -> Result<CVec> {
        if a.degree() != self.degree() {
            return Err(Error::DegreeMismatch { expected: self.degree(), found: a.degree() });
        }
        let bd = self.block_dim();
        let mut v = CVec::zeros(self.dim());
        for k in a.frequencies() {
            let Some(fi) = self.freq_index(&k) else {
                if drop_spill {
                    continue;
                }
                return Err(Error::BandwidthOverflow(k));
            };
            let local = self.local_coords(&a.block(&k))?;
            for j in 0..bd {
                v[fi * bd + j] = local[j];
            }
        }
        Ok(v)
    }
}

/// How assembly treats output modes that leave the target box.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AssemblyMode {
    /// Leaving the box is an error.
    Strict,
    /// Outputs are orthogonally truncated to the box.
    Galerkin,
}

#[derive(Clone, Debug)]
enum Storage {
    Blocks(Vec<CMat>),
    Dense(CMat),
}

/// Matrix of a linear operator between truncated spaces; frequency-diagonal
/// operators are stored block by block.
#[derive(Clone, Debug)]
pub struct SpectralOperator {
    src: TruncatedSpace,
    dst: TruncatedSpace,
    storage: Storage,
}

impl SpectralOperator {
    pub fn assemble<F>(src: &TruncatedSpace, dst: &TruncatedSpace, op: F) -> Result<Self>
    where
        F: Fn(&TrigForm) -> Result<TrigForm> + Sync,
    {
        Self::assemble_mode(src, dst, AssemblyMode::Strict, op)
    }

    pub fn assemble_mode<F>(src: &TruncatedSpace, dst: &TruncatedSpace, mode: AssemblyMode, op: F) -> Result<Self>
    where
        F: Fn(&TrigForm) -> Result<TrigForm> + Sync,
    {
        if !std::sync::Arc::ptr_eq(src.domain(), dst.domain()) && **src.domain() != **dst.domain() {
            return Err(Error::DomainMismatch);
        }
        let sb = src.block_dim();
        let columns: Vec<Result<TrigForm>> = (0..src.freqs.len() * sb)
            .into_par_iter()
            .map(|col| {
                let mut local = vec![C64::new(0.0, 0.0); sb];
                local[col % sb] = C64::new(1.0, 0.0);
                op(&src.block_form(col / sb, &local))
            })
            .collect();
        let columns: Vec<TrigForm> = columns.into_iter().collect::<Result<_>>()?;
        let same_box = src.freqs == dst.freqs;
        let diagonal = same_box
            && columns.iter().enumerate().all(|(col, out)| {
                let k = &src.freqs[col / sb];
                out.terms().all(|(kk, _, _)| kk == k)
            });
        let drop = mode == AssemblyMode::Galerkin;
        let db = dst.block_dim();
        if diagonal {
            let blocks: Vec<CMat> = (0..src.freqs.len())
                .into_par_iter()
                .map(|fi| {
                    let mut m = CMat::zeros(db, sb);
                    for j in 0..sb {
                        let out = &columns[fi * sb + j];
                        if !out.is_zero() {
                            let local = dst.local_coords(&out.block(&src.freqs[fi]))?;
                            for i in 0..db {
                                m[(i, j)] = local[i];
                            }
                        }
                    }
                    Ok(m)
                })
                .collect::<Result<_>>()?;
            return Ok(SpectralOperator { src: src.clone(), dst: dst.clone(), storage: Storage::Blocks(blocks) });
        }
        let mut m = CMat::zeros(dst.dim(), src.dim());
        for (col, out) in columns.iter().enumerate() {
            let v = dst.coords_mode(out, drop)?;
            m.set_column(col, &v);
        }
        Ok(SpectralOperator { src: src.clone(), dst: dst.clone(), storage: Storage::Dense(m) })
    }

    pub fn src(&self) -> &TruncatedSpace {
        &self.src
    }

    pub fn dst(&self) -> &TruncatedSpace {
        &self.dst
    }

    pub fn is_block_diagonal(&self) -> bool {
        matches!(self.storage, Storage::Blocks(_))
    }

    pub fn blocks(&self) -> Option<&[CMat]> {
        match &self.storage {
            Storage::Blocks(b) => Some(b),
            Storage::Dense(_) => None,
        }
    }

    pub fn to_dense(&self) -> CMat {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::Blocks(blocks) => {
                let (db, sb) = (self.dst.block_dim(), self.src.block_dim());
                let mut m = CMat::zeros(self.dst.dim(), self.src.dim());
                for (fi, b) in blocks.iter().enumerate() {
                    m.view_mut((fi * db, fi * sb), (db, sb)).copy_from(b);
                }
                m
            }
        }
    }

    pub fn apply_vec(&self, v: &CVec) -> CVec {
        match &self.storage {
            Storage::Dense(m) => m * v,
            Storage::Blocks(blocks) => {
                let (db, sb) = (self.dst.block_dim(), self.src.block_dim());
                let mut out = CVec::zeros(self.dst.dim());
                for (fi, b) in blocks.iter().enumerate() {
                    let r = b * v.rows(fi * sb, sb);
                    out.rows_mut(fi * db, db).copy_from(&r);
                }
                out
            }
        }
    }

    pub fn apply(&self, a: &TrigForm) -> Result<TrigForm> {
        Ok(self.dst.form(&self.apply_vec(&self.src.coords(a)?)))
    }

    /// `self ∘ inner`.
    pub fn compose(&self, inner: &SpectralOperator) -> Result<SpectralOperator> {
        if inner.dst.space != self.src.space || inner.dst.freqs != self.src.freqs {
            return Err(Error::Precondition("composed operators do not share a middle space".into()));
        }
        let storage = match (&self.storage, &inner.storage) {
            (Storage::Blocks(a), Storage::Blocks(b)) => {
                Storage::Blocks(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            _ => Storage::Dense(self.to_dense() * inner.to_dense()),
        };
        Ok(SpectralOperator { src: inner.src.clone(), dst: self.dst.clone(), storage })
    }

    pub fn operator_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => linalg::operator_norm(m),
            Storage::Blocks(b) => b.par_iter().map(linalg::operator_norm).reduce(|| 0.0, f64::max),
        }
    }

    /// Singular values of every block (or of the dense matrix), descending within each block.
    pub fn block_singular_values(&self) -> Vec<Vec<f64>> {
        match &self.storage {
            Storage::Dense(m) => vec![linalg::singular_values(m)],
            Storage::Blocks(b) => b.par_iter().map(linalg::singular_values).collect(),
        }
    }

    pub fn rank(&self, threshold: f64) -> usize {
        self.block_singular_values().iter().flatten().filter(|s| **s > threshold).count()
    }

    /// Minimum-norm least-squares solution of `self x = rhs` and the norm of what is left over.
    pub fn solve_min_norm(&self, rhs: &TrigForm, threshold: f64) -> Result<(TrigForm, TrigForm)> {
        let b = self.dst.coords(rhs)?;
        let x = match &self.storage {
            Storage::Dense(m) => linalg::lstsq_min_norm(m, &b, threshold),
            Storage::Blocks(blocks) => {
                let (db, sb) = (self.dst.block_dim(), self.src.block_dim());
                let parts: Vec<CVec> = blocks
                    .par_iter()
                    .enumerate()
                    .map(|(fi, m)| {
                        let rb: CVec = b.rows(fi * db, db).into_owned();
                        if rb.norm() == 0.0 {
                            CVec::zeros(sb)
                        } else {
                            linalg::lstsq_min_norm(m, &rb, threshold)
                        }
                    })
                    .collect();
                let mut x = CVec::zeros(self.src.dim());
                for (fi, p) in parts.iter().enumerate() {
                    x.rows_mut(fi * sb, sb).copy_from(p);
                }
                x
            }
        };
        let sol = self.src.form(&x);
        let leftover = self.dst.form(&(b - self.apply_vec(&x)));
        Ok((sol, leftover))
    }
}

/// Betti number at one frequency.
#[derive(Clone, Debug, Serialize)]
pub struct FrequencyBetti {
    pub k: Freq,
    pub kernel: usize,
    pub image: usize,
    pub betti: usize,
}

/// Ranks of a two-step complex `op_in` then `op_out` in a truncated space.
#[derive(Clone, Debug, Serialize)]
pub struct CohomologyReport {
    pub degree: usize,
    pub bandwidth: usize,
    pub space_dim: usize,
    pub kernel: usize,
    pub image: usize,
    pub betti: usize,
    /// Nonzero entries only; absent when an operator is dense.
    pub per_frequency: Vec<FrequencyBetti>,
    /// Smallest singular value counted as nonzero.
    pub smallest_nonzero_sigma: f64,
    /// Largest singular value counted as zero.
    pub largest_zero_sigma: f64,
    /// Operator norm of `op_out ∘ op_in`.
    pub exactness_defect: f64,
    pub threshold: f64,
}

fn block_ranks(op: &SpectralOperator, threshold: f64, gap: &mut (f64, f64)) -> Vec<usize> {
    op.block_singular_values()
        .iter()
        .map(|s| {
            for v in s {
                if *v > threshold {
                    gap.0 = gap.0.min(*v);
                } else {
                    gap.1 = gap.1.max(*v);
                }
            }
            s.iter().filter(|v| **v > threshold).count()
        })
        .collect()
}

/// Kernel, image and Betti numbers at the middle space of `op_in`, `op_out`.
/// Either may be absent (the complex starts or ends there).
pub fn cohomology_dims(
    op_in: Option<&SpectralOperator>,
    op_out: Option<&SpectralOperator>,
    threshold: f64,
) -> Result<CohomologyReport> {
    let middle = match (op_in, op_out) {
        (_, Some(o)) => o.src.clone(),
        (Some(i), None) => i.dst.clone(),
        (None, None) => return Err(Error::Precondition("at least one operator is required".into())),
    };
    let mut defect = 0.0;
    if let (Some(i), Some(o)) = (op_in, op_out) {
        defect = o.compose(i)?.operator_norm();
        if defect > RANK_THRESHOLD.max(threshold) {
            return Err(Error::Numerical(format!("operators do not form a complex: |out ∘ in| = {defect:e}")));
        }
    }
    let mut gap = (f64::INFINITY, 0.0f64);
    let nf = middle.freqs.len();
    let bd = middle.block_dim();
    let blockwise = op_in.map_or(true, |o| o.is_block_diagonal()) && op_out.map_or(true, |o| o.is_block_diagonal());
    let mut per_frequency = Vec::new();
    let (kernel, image);
    if blockwise {
        let ranks_out = op_out.map(|o| block_ranks(o, threshold, &mut gap)).unwrap_or_else(|| vec![0; nf]);
        let ranks_in = op_in.map(|o| block_ranks(o, threshold, &mut gap)).unwrap_or_else(|| vec![0; nf]);
        let mut kt = 0;
        let mut it = 0;
        for fi in 0..nf {
            let ker = bd - ranks_out[fi];
            let im = ranks_in[fi];
            kt += ker;
            it += im;
            if ker > im {
                per_frequency.push(FrequencyBetti { k: middle.freqs[fi].clone(), kernel: ker, image: im, betti: ker - im });
            }
        }
        kernel = kt;
        image = it;
    } else {
        let r_out = op_out.map(|o| block_ranks(o, threshold, &mut gap).iter().sum()).unwrap_or(0);
        image = op_in.map(|o| block_ranks(o, threshold, &mut gap).iter().sum()).unwrap_or(0);
        kernel = middle.dim() - r_out;
    }
    Ok(CohomologyReport {
        degree: middle.degree(),
        bandwidth: middle.bandwidth,
        space_dim: middle.dim(),
        kernel,
        image,
        betti: kernel.saturating_sub(image),
        per_frequency,
        smallest_nonzero_sigma: gap.0,
        largest_zero_sigma: gap.1,
        exactness_defect: defect,
        threshold,
    })
}

/// Component of `a` orthogonal to `im(prev)` and lying in `ker(next)`; for
/// block-diagonal operators this is computed frequency by frequency.
pub fn harmonic_projection(
    a: &TrigForm,
    prev: Option<&SpectralOperator>,
    next: Option<&SpectralOperator>,
    threshold: f64,
) -> Result<TrigForm> {
    let middle = match (prev, next) {
        (_, Some(o)) => o.src.clone(),
        (Some(i), None) => i.dst.clone(),
        (None, None) => return Ok(a.clone()),
    };
    let v = middle.coords(a)?;
    let proj = |m: &CMat, x: &CVec, onto_range: bool| -> CVec {
        let basis =
            if onto_range { linalg::range_space(m, threshold) } else { linalg::range_space(&m.adjoint(), threshold) };
        &basis * (basis.adjoint() * x)
    };
    let blockwise = prev.map_or(true, |o| o.is_block_diagonal()) && next.map_or(true, |o| o.is_block_diagonal());
    if !blockwise {
        let mut out = v.clone();
        if let Some(p) = prev {
            out -= proj(&p.to_dense(), &v, true);
        }
        if let Some(nx) = next {
            out -= proj(&nx.to_dense(), &v, false);
        }
        return Ok(middle.form(&out));
    }
    let bd = middle.block_dim();
    let parts: Vec<CVec> = (0..middle.freqs.len())
        .into_par_iter()
        .map(|fi| {
            let x: CVec = v.rows(fi * bd, bd).into_owned();
            let mut out = x.clone();
            if x.norm() == 0.0 {
                return out;
            }
            if let Some(p) = prev {
                out -= proj(&p.blocks().expect("block operator")[fi], &x, true);
            }
            if let Some(nx) = next {
                out -= proj(&nx.blocks().expect("block operator")[fi], &x, false);
            }
            out
        })
        .collect();
    let mut out = CVec::zeros(middle.dim());
    for (fi, p) in parts.iter().enumerate() {
        out.rows_mut(fi * bd, bd).copy_from(p);
    }
    Ok(middle.form(&out))
}

/// Harmonic, exact and coexact parts of a form on a flat torus.
#[derive(Clone, Debug)]
pub struct HodgeParts {
    pub harmonic: TrigForm,
    pub exact: TrigForm,
    pub coexact: TrigForm,
    /// Norm of `a - harmonic - exact - coexact`.
    pub residual: f64,
}

pub fn hodge_decompose(a: &TrigForm) -> HodgeParts {
    let zero = vec![0; a.dim()];
    let harmonic = a.filter(|k, _| k == zero.as_slice());
    let g = green(a);
    let exact = if a.degree() == 0 { TrigForm::zero(a.domain(), 0) } else { ext_d(&codifferential(&g)) };
    let coexact = if a.degree() >= a.dim() { TrigForm::zero(a.domain(), a.degree()) } else { codifferential(&ext_d(&g)) };
    let residual = (a - &harmonic - &exact - &coexact).norm();
    HodgeParts { harmonic, exact, coexact, residual }
}

/// A coordinate subtorus leaf: the transverse axes are frozen at given values.
#[derive(Clone, Debug)]
pub struct LeafSpec {
    ambient: Domain,
    leaf_axes: Vec<usize>,
    transverse: Vec<(usize, f64)>,
    domain: Domain,
    complex: Option<ComplexStructure>,
}

impl LeafSpec {
    /// `leaf_axes` ascending; `values` are the coordinates of the remaining axes in ascending order.
    pub fn new(ambient: &Domain, leaf_axes: &[usize], values: &[f64]) -> Result<Self> {
        let n = ambient.dim();
        if leaf_axes.is_empty() || leaf_axes.windows(2).any(|w| w[0] >= w[1]) || leaf_axes.iter().any(|a| *a >= n) {
            return Err(Error::Precondition(format!("leaf axes {leaf_axes:?} must be ascending and inside 0..{n}")));
        }
        let trans: Vec<usize> = (0..n).filter(|a| !leaf_axes.contains(a)).collect();
        if trans.len() != values.len() {
            return Err(Error::Precondition(format!("{} transverse values for {} transverse axes", values.len(), trans.len())));
        }
        let g = ambient.metric();
        let m = leaf_axes.len();
        let metric = DMatrix::from_fn(m, m, |i, j| g[(leaf_axes[i], leaf_axes[j])]);
        let names = leaf_axes.iter().map(|a| ambient.axis_names()[*a].clone()).collect();
        let domain = FlatTorusDomain::with_axis_names(metric, 1, names)?;
        Ok(LeafSpec {
            ambient: ambient.clone(),
            leaf_axes: leaf_axes.to_vec(),
            transverse: trans.into_iter().zip(values.iter().copied()).collect(),
            domain,
            complex: None,
        })
    }

    /// Attaches the standard complex structure of the leaf axes taken in pairs.
    pub fn with_standard_complex(mut self) -> Result<Self> {
        self.complex = Some(ComplexStructure::standard(&self.domain)?);
        Ok(self)
    }

    pub fn with_complex(mut self, j: ComplexStructure) -> Result<Self> {
        if **j.domain() != *self.domain {
            return Err(Error::DomainMismatch);
        }
        self.complex = Some(j);
        Ok(self)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    pub fn ambient(&self) -> &Domain {
        &self.ambient
    }

    pub fn leaf_axes(&self) -> &[usize] {
        &self.leaf_axes
    }

    pub fn transverse(&self) -> &[(usize, f64)] {
        &self.transverse
    }

    pub fn complex(&self) -> Result<&ComplexStructure> {
        self.complex.as_ref().ok_or_else(|| Error::Precondition("leaf has no complex structure".into()))
    }

    /// Pullback to the leaf: transverse coordinates are substituted exactly.
    pub fn restrict(&self, a: &TrigForm) -> Result<TrigForm> {
        if **a.domain() != *self.ambient {
            return Err(Error::DomainMismatch);
        }
        let keep = self.leaf_axes.iter().fold(IndexSet::EMPTY, |s, a| s.insert(*a));
        let mut terms = Vec::new();
        for (k, s, c) in a.terms() {
            if !s.is_subset(keep) {
                continue;
            }
            let phase: f64 = self.transverse.iter().map(|(ax, v)| k[*ax] as f64 * v).sum();
            let kk: Freq = self.leaf_axes.iter().map(|ax| k[*ax]).collect();
            let mut ss = IndexSet::EMPTY;
            for (pos, ax) in self.leaf_axes.iter().enumerate() {
                if s.contains(*ax) {
                    ss = ss.insert(pos);
                }
            }
            terms.push((kk, ss, c * C64::from_polar(1.0, 2.0 * std::f64::consts::PI * phase)));
        }
        TrigForm::from_terms(&self.domain, a.degree(), terms)
    }

    /// Extension of a leaf form to the ambient torus, constant in the transverse directions.
    pub fn extend(&self, f: &TrigForm) -> Result<TrigForm> {
        if **f.domain() != *self.domain {
            return Err(Error::DomainMismatch);
        }
        let n = self.ambient.dim();
        let mut terms = Vec::new();
        for (k, s, c) in f.terms() {
            let mut kk = vec![0; n];
            let mut ss = IndexSet::EMPTY;
            for (pos, ax) in self.leaf_axes.iter().enumerate() {
                kk[*ax] = k[pos];
                if s.contains(pos) {
                    ss = ss.insert(*ax);
                }
            }
            terms.push((kk, ss, c));
        }
        TrigForm::from_terms(&self.ambient, f.degree(), terms)
    }

    /// Kähler form `omega(u, v) = g(J u, v)` of the leaf.
    pub fn kahler_form(&self) -> Result<TrigForm> {
        let j = self.complex()?;
        let g = self.domain.metric();
        let w = j.matrix().transpose() * g;
        let m = self.domain.dim();
        let mut out = TrigForm::zero(&self.domain, 2);
        for a in 0..m {
            for b in a + 1..m {
                if w[(a, b)] != 0.0 {
                    out.add_assign(&TrigForm::monomial(&self.domain, &vec![0; m], &[a, b], C64::new(w[(a, b)], 0.0))?);
                }
            }
        }
        Ok(out)
    }

    /// Weight function `*(b ^ J b ^ omega^{m-1})` defining the moment constraint of `b`.
    pub fn moment_weight(&self, b: &TrigForm) -> Result<TrigForm> {
        let j = self.complex()?;
        let jb = crate::forms::apply_j(b, j)?;
        let mut top = wedge(b, &jb)?;
        let omega = self.kahler_form()?;
        for _ in 1..self.domain.dim() / 2 {
            top = wedge(&top, &omega)?;
        }
        Ok(hodge_star(&top))
    }
}

/// Leaf-harmonic part of `b` restricted to the leaf: its constant-coefficient modes.
pub fn harmonic_b_f(b: &TrigForm, leaf: &LeafSpec) -> Result<TrigForm> {
    let r = leaf.restrict(b)?;
    let zero = vec![0; leaf.domain.dim()];
    Ok(r.filter(|k, _| k == zero.as_slice()))
}

/// Constraint subspace for [`laplace_spectrum`].
#[derive(Clone, Debug)]
pub enum SpectrumConstraint {
    All,
    ZeroMean,
    /// Functions with `∫ f w = 0` for the weight `w` on the leaf.
    Moment(TrigForm),
}

/// Lowest `count` eigenvalues of the leaf Laplacian on functions of bandwidth
/// `bandwidth` in the constraint subspace, ascending.
pub fn laplace_spectrum(
    leaf: &LeafSpec,
    count: usize,
    constraint: &SpectrumConstraint,
    bandwidth: usize,
) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::Precondition("count must be at least 1".into()));
    }
    let dom = leaf.domain();
    let freqs = freq_box(dom.dim(), bandwidth);
    let diag: Vec<f64> = freqs.iter().map(|k| dom.eigenvalue(k)).collect();
    let zero = vec![0; dom.dim()];
    let mut ev: Vec<f64> = match constraint {
        SpectrumConstraint::All => diag.clone(),
        SpectrumConstraint::ZeroMean => freqs.iter().zip(&diag).filter(|(k, _)| **k != zero).map(|(_, v)| *v).collect(),
        SpectrumConstraint::Moment(w) => {
            if w.degree() != 0 || **w.domain() != **dom {
                return Err(Error::Precondition("moment weight must be a function on the leaf".into()));
            }
            if w.is_zero() {
                diag.clone()
            } else if w.frequencies() == vec![zero.clone()] {
                return laplace_spectrum(leaf, count, &SpectrumConstraint::ZeroMean, bandwidth);
            } else {
                let row = CMat::from_fn(1, freqs.len(), |_, i| {
                    let neg: Freq = freqs[i].iter().map(|v| -v).collect();
                    w.coeff(&neg, IndexSet::EMPTY)
                });
                let q = linalg::null_space(&row, RANK_THRESHOLD);
                let d = CMat::from_diagonal(&CVec::from_iterator(diag.len(), diag.iter().map(|v| C64::new(*v, 0.0))));
                linalg::hermitian_eigenvalues(&(q.adjoint() * d * &q))
            }
        }
    };
    if ev.is_empty() {
        return Err(Error::Precondition("constraint subspace is empty".into()));
    }
    ev.sort_by(f64::total_cmp);
    ev.truncate(count);
    Ok(ev)
}

/// First eigenvalue above `1e-9` in a spectrum.
pub fn first_positive(ev: &[f64]) -> Option<f64> {
    ev.iter().copied().find(|v| *v > 1e-9)
}
