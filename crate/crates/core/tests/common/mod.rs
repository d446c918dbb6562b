#![allow(dead_code)]

use folideform::forms::{Domain, FlatTorusDomain, IndexSet, TrigForm, VectorField, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn t3() -> Domain {
    FlatTorusDomain::euclidean(3).unwrap()
}

/// Sparse random form: `terms` modes with `|k_i| <= bw` and random covectors.
pub fn random_form(rng: &mut ChaCha8Rng, dom: &Domain, degree: usize, bw: i32, terms: usize) -> TrigForm {
    let n = dom.dim();
    let basis = dom.basis(degree).to_vec();
    let raw: Vec<_> = (0..terms)
        .map(|_| {
            let k: Vec<i32> = (0..n).map(|_| rng.gen_range(-bw..=bw)).collect();
            let s: IndexSet = basis[rng.gen_range(0..basis.len())];
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            (k, s, c)
        })
        .collect();
    TrigForm::from_terms(dom, degree, raw).unwrap()
}

/// Random real form (conjugate-symmetric coefficients).
pub fn random_real_form(rng: &mut ChaCha8Rng, dom: &Domain, degree: usize, bw: i32, terms: usize) -> TrigForm {
    random_form(rng, dom, degree, bw, terms).real_part()
}

pub fn random_field(rng: &mut ChaCha8Rng, dom: &Domain, bw: i32, terms: usize) -> VectorField {
    VectorField::new((0..dom.dim()).map(|_| random_form(rng, dom, 0, bw, terms)).collect()).unwrap()
}

/// Evaluates the coefficient vector of `a` at `x` by direct summation.
pub fn point(a: &TrigForm, x: &[f64]) -> Vec<C64> {
    a.eval(x)
}

pub fn close(a: &TrigForm, b: &TrigForm, tol: f64) -> bool {
    a.distance(b) <= tol
}
