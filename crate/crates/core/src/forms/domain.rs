use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::f64::consts::PI;
use std::sync::Arc;

/// Largest supported torus dimension; the per-degree tables are indexed by bitmask.
pub const MAX_DIM: usize = 12;

/// Sorted set of 0-based axes stored as a bitmask.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct IndexSet(pub u32);

impl IndexSet {
    pub const EMPTY: IndexSet = IndexSet(0);
    /// Upper bound for range scans; not a valid set on any supported domain.
    pub const FULL: IndexSet = IndexSet(u32::MAX);

    pub fn all(n: usize) -> Self {
        IndexSet(((1u64 << n) - 1) as u32)
    }

    pub fn single(axis: usize) -> Self {
        IndexSet(1 << axis)
    }

    /// Sorts `axes`, returning the set and the sign of the sorting permutation.
    /// Repeated axes are an error.
    pub fn from_unordered(axes: &[usize], n: usize) -> Result<(Self, f64)> {
        let mut mask = 0u32;
        let mut inversions = 0u32;
        for (pos, &a) in axes.iter().enumerate() {
            if a >= n {
                return Err(Error::InvalidTerm(format!("axis {} outside a {n}-torus", a + 1)));
            }
            if mask & (1 << a) != 0 {
                return Err(Error::InvalidTerm(format!("repeated axis {}", a + 1)));
            }
            inversions += axes[..pos].iter().filter(|&&b| b > a).count() as u32;
            mask |= 1 << a;
        }
        Ok((IndexSet(mask), if inversions % 2 == 0 { 1.0 } else { -1.0 }))
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn contains(self, axis: usize) -> bool {
        self.0 & (1 << axis) != 0
    }

    pub fn insert(self, axis: usize) -> Self {
        IndexSet(self.0 | (1 << axis))
    }

    pub fn remove(self, axis: usize) -> Self {
        IndexSet(self.0 & !(1 << axis))
    }

    /// Number of members strictly below `axis`.
    pub fn count_below(self, axis: usize) -> u32 {
        (self.0 & ((1u32 << axis) - 1)).count_ones()
    }

    pub fn max_axis(self) -> Option<usize> {
        if self.0 == 0 {
            None
        } else {
            Some(31 - self.0.leading_zeros() as usize)
        }
    }

    pub fn axes(self) -> Vec<usize> {
        (0..32).filter(|a| self.contains(*a)).collect()
    }

    pub fn complement(self, n: usize) -> Self {
        IndexSet(!self.0 & Self::all(n).0)
    }

    pub fn is_subset(self, other: IndexSet) -> bool {
        self.0 & !other.0 == 0
    }

    /// `dx_self ^ dx_other = sign dx_union`, or `None` if they overlap.
    pub fn wedge(self, other: IndexSet) -> Option<(Self, f64)> {
        if self.0 & other.0 != 0 {
            return None;
        }
        let mut inversions = 0u32;
        for b in other.axes() {
            inversions += (self.0 >> (b + 1)).count_ones();
        }
        Some((IndexSet(self.0 | other.0), if inversions % 2 == 0 { 1.0 } else { -1.0 }))
    }
}

/// Determinant of the submatrix with rows `rows` and columns `cols`.
pub(crate) fn minor(m: &DMatrix<f64>, rows: IndexSet, cols: IndexSet) -> f64 {
    let r = rows.axes();
    let c = cols.axes();
    if r.len() != c.len() {
        return 0.0;
    }
    match r.len() {
        0 => 1.0,
        1 => m[(r[0], c[0])],
        2 => m[(r[0], c[0])] * m[(r[1], c[1])] - m[(r[0], c[1])] * m[(r[1], c[0])],
        k => DMatrix::from_fn(k, k, |i, j| m[(r[i], c[j])]).determinant(),
    }
}

#[derive(Clone, Debug)]
struct DegreeTables {
    basis: Vec<IndexSet>,
    gram: DMatrix<f64>,
    star: DMatrix<f64>,
}

/// The flat torus `R^n / Z^n` with a constant metric and an orientation sign.
#[derive(Clone, Debug)]
pub struct FlatTorusDomain {
    dim: usize,
    metric: DMatrix<f64>,
    metric_inv: DMatrix<f64>,
    sqrt_det: f64,
    orientation: i32,
    axis_names: Vec<String>,
    tables: Vec<DegreeTables>,
    position: Vec<usize>,
}

pub type Domain = Arc<FlatTorusDomain>;

impl PartialEq for FlatTorusDomain {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.metric == other.metric
            && self.orientation == other.orientation
            && self.axis_names == other.axis_names
    }
}

impl FlatTorusDomain {
    pub fn new(metric: DMatrix<f64>, orientation: i32) -> Result<Domain> {
        let n = metric.nrows();
        let names = (1..=n).map(|i| format!("x{i}")).collect();
        Self::with_axis_names(metric, orientation, names)
    }

    pub fn euclidean(n: usize) -> Result<Domain> {
        Self::new(DMatrix::identity(n, n), 1)
    }

    pub fn with_axis_names(metric: DMatrix<f64>, orientation: i32, axis_names: Vec<String>) -> Result<Domain> {
        let n = metric.nrows();
        if n == 0 {
            return Err(Error::InvalidMetric("dimension must be at least 1".into()));
        }
        if n > MAX_DIM {
            return Err(Error::InvalidMetric(format!("dimension {n} exceeds the supported {MAX_DIM}")));
        }
        if metric.ncols() != n {
            return Err(Error::InvalidMetric(format!("{}x{} matrix is not square", n, metric.ncols())));
        }
        if metric.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMetric("non-finite entry".into()));
        }
        let scale = metric.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (metric[(i, j)] - metric[(j, i)]).abs() > 1e-12 * scale {
                    return Err(Error::InvalidMetric(format!("not symmetric at ({}, {})", i + 1, j + 1)));
                }
            }
        }
        let chol = metric
            .clone()
            .cholesky()
            .ok_or_else(|| Error::InvalidMetric("not positive definite".into()))?;
        let eig = metric.clone().symmetric_eigen();
        if eig.eigenvalues.iter().any(|&l| l <= 0.0) {
            return Err(Error::InvalidMetric("not positive definite".into()));
        }
        if orientation != 1 && orientation != -1 {
            return Err(Error::InvalidMetric(format!("orientation must be +1 or -1, got {orientation}")));
        }
        if axis_names.len() != n {
            return Err(Error::InvalidMetric(format!("{} axis names for dimension {n}", axis_names.len())));
        }
        let metric_inv = chol.inverse();
        let det = chol.l().diagonal().iter().map(|v| v * v).product::<f64>();
        let sqrt_det = det.sqrt();

        let mut bases: Vec<Vec<IndexSet>> = vec![Vec::new(); n + 1];
        let mut masks: Vec<u32> = (0..(1u32 << n)).collect();
        masks.sort_by_key(|m| IndexSet(*m).axes());
        for m in masks {
            bases[m.count_ones() as usize].push(IndexSet(m));
        }
        let mut position = vec![0usize; 1 << n];
        for b in &bases {
            for (i, s) in b.iter().enumerate() {
                position[s.0 as usize] = i;
            }
        }
        let full = IndexSet::all(n);
        let mut grams = Vec::with_capacity(n + 1);
        for b in &bases {
            grams.push(DMatrix::from_fn(b.len(), b.len(), |i, j| minor(&metric_inv, b[i], b[j])));
        }
        let mut tables = Vec::with_capacity(n + 1);
        for p in 0..=n {
            let src = &bases[p];
            let dst = &bases[n - p];
            let mut star = DMatrix::zeros(dst.len(), src.len());
            for (ci, _) in src.iter().enumerate() {
                for (ii, iset) in src.iter().enumerate() {
                    let comp = iset.complement(n);
                    let (_, eps) = iset.wedge(comp).expect("complement is disjoint");
                    debug_assert_eq!(iset.0 | comp.0, full.0);
                    let row = position[comp.0 as usize];
                    star[(row, ci)] += eps * grams[p][(ii, ci)] * sqrt_det * orientation as f64;
                }
            }
            tables.push(DegreeTables { basis: src.clone(), gram: grams[p].clone(), star });
        }
        Ok(Arc::new(FlatTorusDomain {
            dim: n,
            metric,
            metric_inv,
            sqrt_det,
            orientation,
            axis_names,
            tables,
            position,
        }))
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn metric(&self) -> &DMatrix<f64> {
        &self.metric
    }

    pub fn metric_inv(&self) -> &DMatrix<f64> {
        &self.metric_inv
    }

    pub fn sqrt_det(&self) -> f64 {
        self.sqrt_det
    }

    pub fn orientation(&self) -> i32 {
        self.orientation
    }

    pub fn axis_names(&self) -> &[String] {
        &self.axis_names
    }

    pub fn axis_index(&self, name: &str) -> Option<usize> {
        self.axis_names.iter().position(|a| a == name)
    }

    /// Ordered basis of `p`-covectors (lexicographic in the axes).
    pub fn basis(&self, p: usize) -> &[IndexSet] {
        &self.tables[p].basis
    }

    pub fn basis_position(&self, s: IndexSet) -> usize {
        self.position[s.0 as usize]
    }

    /// Pointwise inner products `<dx_I, dx_K> = det(G^{-1}[I, K])`.
    pub fn gram(&self, p: usize) -> &DMatrix<f64> {
        &self.tables[p].gram
    }

    /// Matrix of the Hodge star from degree `p` to `n - p` in the ordered bases.
    pub fn star_matrix(&self, p: usize) -> &DMatrix<f64> {
        &self.tables[p].star
    }

    /// Eigenvalue `4 pi^2 k^T G^{-1} k` of the flat Laplacian on the mode `k`.
    pub fn eigenvalue(&self, k: &[i32]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            if k[i] == 0 {
                continue;
            }
            for j in 0..self.dim {
                s += k[i] as f64 * self.metric_inv[(i, j)] * k[j] as f64;
            }
        }
        4.0 * PI * PI * s
    }

    /// Same metric and names with the opposite orientation.
    pub fn reversed(&self) -> Domain {
        Self::with_axis_names(self.metric.clone(), -self.orientation, self.axis_names.clone())
            .expect("validated metric")
    }
}

/// A constant complex structure on the tangent space of an even-dimensional torus.
#[derive(Clone, Debug)]
pub struct ComplexStructure {
    domain: Domain,
    matrix: DMatrix<f64>,
}

impl ComplexStructure {
    pub fn new(domain: &Domain, matrix: DMatrix<f64>) -> Result<Self> {
        let n = domain.dim();
        if n % 2 != 0 {
            return Err(Error::InvalidComplexStructure(format!("odd dimension {n}")));
        }
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(Error::InvalidComplexStructure("matrix shape does not match the domain".into()));
        }
        let sq = &matrix * &matrix + DMatrix::<f64>::identity(n, n);
        if sq.amax() > 1e-12 {
            return Err(Error::InvalidComplexStructure(format!("J^2 + I has entry {:e}", sq.amax())));
        }
        let g = domain.metric();
        let compat = matrix.transpose() * g * &matrix - g;
        if compat.amax() > 1e-12 * g.amax().max(1.0) {
            return Err(Error::InvalidComplexStructure(format!(
                "not compatible with the metric (defect {:e})",
                compat.amax()
            )));
        }
        Ok(ComplexStructure { domain: domain.clone(), matrix })
    }

    /// Axes ordered `(x1, y1, .., xm, ym)` with `J d/dx_i = d/dy_i`.
    pub fn standard(domain: &Domain) -> Result<Self> {
        let n = domain.dim();
        if n % 2 != 0 {
            return Err(Error::InvalidComplexStructure(format!("odd dimension {n}")));
        }
        let mut m = DMatrix::zeros(n, n);
        for i in 0..n / 2 {
            m[(2 * i + 1, 2 * i)] = 1.0;
            m[(2 * i, 2 * i + 1)] = -1.0;
        }
        Self::new(domain, m)
    }

    pub fn domain(&self) -> &Domain {
        &self.domain
    }

    /// `J` acting on column vectors of contravariant components.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wedge_signs() {
        let a = IndexSet::single(2);
        let b = IndexSet::single(0);
        assert_eq!(a.wedge(b), Some((IndexSet(0b101), -1.0)));
        assert_eq!(b.wedge(a), Some((IndexSet(0b101), 1.0)));
        assert_eq!(a.wedge(a), None);
        let (s, sign) = IndexSet::from_unordered(&[2, 0, 1], 3).unwrap();
        assert_eq!(s, IndexSet::all(3));
        assert_eq!(sign, 1.0);
    }

    #[test]
    fn rejects_bad_metric() {
        assert!(FlatTorusDomain::new(DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]), 1).is_err());
        assert!(FlatTorusDomain::new(DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]), 1).is_err());
        assert!(FlatTorusDomain::new(DMatrix::identity(2, 2), 0).is_err());
    }

    #[test]
    fn standard_structure_is_valid() {
        let d = FlatTorusDomain::euclidean(4).unwrap();
        let j = ComplexStructure::standard(&d).unwrap();
        assert_eq!(j.matrix()[(1, 0)], 1.0);
        assert!(ComplexStructure::standard(&FlatTorusDomain::euclidean(3).unwrap()).is_err());
        let skew = DMatrix::from_row_slice(2, 2, &[0.0, -2.0, 0.5, 0.0]);
        assert!(ComplexStructure::new(&FlatTorusDomain::euclidean(2).unwrap(), skew).is_err());
    }
}
