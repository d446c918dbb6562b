mod common;

use common::*;
use folideform::forms::*;
use folideform::Error;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

#[test]
fn wedge_of_coordinate_forms() {
    let d = t3();
    let w = wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 1)).unwrap();
    assert_eq!(w.len(), 1);
    assert_eq!(w.mean_coeff(IndexSet(0b011)), c(1.0));
    assert!(wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 0)).unwrap().is_zero());
}

#[test]
fn wedge_product_to_sum_matches_pointwise_products() {
    let d = t3();
    let a = TrigForm::sin_mode(&d, &[0, 0, 1], &[0], 1.0).unwrap();
    let b = TrigForm::cos_mode(&d, &[0, 0, 1], &[1], 1.0).unwrap();
    let w = wedge(&a, &b).unwrap();
    let expected = TrigForm::sin_mode(&d, &[0, 0, 2], &[0, 1], 0.5).unwrap();
    assert!(w.distance(&expected) < 1e-15);
    let mut r = rng(1);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let direct = (2.0 * PI * x[2]).sin() * (2.0 * PI * x[2]).cos();
        let v = w.eval(&x)[w.domain().basis_position(IndexSet(0b011))];
        assert!((v - c(direct)).norm() < 1e-13);
    }
}

#[test]
fn wedge_errors() {
    let d = t3();
    let two = wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 1)).unwrap();
    assert!(matches!(wedge(&two, &two), Err(Error::DegreeOverflow { .. })));
    let other = FlatTorusDomain::euclidean(2).unwrap();
    assert!(matches!(wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&other, 0)), Err(Error::DomainMismatch)));
}

#[test]
fn exterior_derivative_examples() {
    let d = t3();
    assert!(ext_d(&TrigForm::constant(&d, 3.0)).is_zero());
    let a = TrigForm::sin_mode(&d, &[0, 0, 1], &[0], 1.0).unwrap();
    let da = ext_d(&a);
    let expected = TrigForm::cos_mode(&d, &[0, 0, 1], &[2, 0], 2.0 * PI).unwrap();
    assert!(da.distance(&expected) < 1e-14);
    let top = wedge(&wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 1)).unwrap(), &TrigForm::dx(&d, 2)).unwrap();
    let dtop = ext_d(&top.mul_fn(&TrigForm::sin_mode(&d, &[1, 0, 0], &[], 1.0).unwrap()));
    assert_eq!(dtop.degree(), 4);
    assert!(dtop.is_zero());
}

/// `(d a)_{ij} = d_i a_j - d_j a_i` by central differences.
#[test]
fn exterior_derivative_matches_finite_differences() {
    let d = t3();
    let mut r = rng(2);
    let a = random_real_form(&mut r, &d, 1, 2, 6);
    let da = ext_d(&a);
    let h = 1e-5;
    for _ in 0..10 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let deriv = |axis: usize, comp: usize| {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[axis] += h;
            xm[axis] -= h;
            (a.eval(&xp)[comp] - a.eval(&xm)[comp]) / (2.0 * h)
        };
        let v = da.eval(&x);
        for (pos, set) in d.basis(2).iter().enumerate() {
            let ax = set.axes();
            let fd = deriv(ax[0], ax[1]) - deriv(ax[1], ax[0]);
            assert!((v[pos] - fd).norm() < 1e-6 * (1.0 + fd.norm()), "{:?} vs {:?}", v[pos], fd);
        }
    }
}

#[test]
fn interior_examples() {
    let d = t3();
    let ds = VectorField::coordinate(&d, 2);
    let one = interior(&ds, &TrigForm::dx(&d, 2)).unwrap();
    assert_eq!(one, TrigForm::constant(&d, 1.0));
    let two = wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 2)).unwrap();
    assert!(interior(&ds, &two).unwrap().distance(&-TrigForm::dx(&d, 0)) == 0.0);
    assert!(matches!(interior(&ds, &TrigForm::constant(&d, 1.0)), Err(Error::UnsupportedDegree { .. })));
}

#[test]
fn lie_derivative_examples() {
    let d = t3();
    let ds = VectorField::coordinate(&d, 2);
    assert!(lie_derivative(&ds, &TrigForm::dx(&d, 2)).unwrap().is_zero());
    let a = TrigForm::sin_mode(&d, &[0, 0, 1], &[0], 1.0).unwrap();
    let expected = TrigForm::cos_mode(&d, &[0, 0, 1], &[0], 2.0 * PI).unwrap();
    assert!(lie_derivative(&ds, &a).unwrap().distance(&expected) < 1e-14);
}

#[test]
fn hodge_star_examples() {
    let d2 = FlatTorusDomain::euclidean(2).unwrap();
    assert_eq!(hodge_star(&TrigForm::dx(&d2, 0)), TrigForm::dx(&d2, 1));
    let g = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
    let dg = FlatTorusDomain::new(g.clone(), 1).unwrap();
    let vol = hodge_star(&TrigForm::constant(&dg, 1.0));
    assert!((vol.mean_coeff(IndexSet(0b11)) - c(g.determinant().sqrt())).norm() < 1e-15);
}

/// Parseval against grid quadrature of the pointwise inner product, with
/// `<dx_i, dx_j> = (G^{-1})_{ij}` taken from an independent inverse.
#[test]
fn l2_inner_matches_quadrature() {
    let g = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.2, 0.0, 0.2, 1.5]);
    let d = FlatTorusDomain::new(g.clone(), 1).unwrap();
    let ginv = g.clone().try_inverse().unwrap();
    let mut r = rng(3);
    for _ in 0..5 {
        let a = random_form(&mut r, &d, 1, 2, 5);
        let b = random_form(&mut r, &d, 1, 2, 5);
        let exact = l2_inner(&a, &b).unwrap();
        let n = 5;
        let mut quad = c(0.0);
        for idx in 0..n * n * n {
            let x = grid_point(idx, n, 3);
            let (va, vb) = (a.eval(&x), b.eval(&x));
            for i in 0..3 {
                for j in 0..3 {
                    quad += va[i] * vb[j].conj() * ginv[(i, j)];
                }
            }
        }
        quad *= g.determinant().sqrt() / (n * n * n) as f64;
        assert!((exact - quad).norm() < 1e-10, "{exact} vs {quad}");
    }
    let e = t3();
    assert_eq!(l2_inner(&TrigForm::dx(&e, 0), &TrigForm::dx(&e, 0)).unwrap(), c(1.0));
    let s = TrigForm::sin_mode(&e, &[0, 0, 1], &[], 1.0).unwrap();
    let co = TrigForm::cos_mode(&e, &[0, 0, 1], &[], 1.0).unwrap();
    assert!(l2_inner(&s, &co).unwrap().norm() < 1e-15);
    assert!(matches!(l2_inner(&s, &TrigForm::dx(&e, 0)), Err(Error::DegreeMismatch { .. })));
}

#[test]
fn sup_norm_examples() {
    let d = t3();
    let a = TrigForm::dx(&d, 0).scale_real(3.0);
    assert_eq!(sup_norm_sq(&a, 5).unwrap(), (9.0, 9.0));
    assert_eq!(sup_norm_sq(&TrigForm::zero(&d, 1), 3).unwrap(), (0.0, 0.0));
    let s1 = FlatTorusDomain::euclidean(1).unwrap();
    let sin = TrigForm::sin_mode(&s1, &[1], &[0], 1.0).unwrap();
    let (lo, hi) = sup_norm_sq(&sin, 5).unwrap();
    assert!((hi - 1.0).abs() < 1e-15);
    assert!(lo <= hi && lo > 0.9);
    let (lo_fine, _) = sup_norm_sq(&sin, 401).unwrap();
    assert!((lo_fine - 1.0).abs() < 1e-4);
    assert!(matches!(sup_norm_sq(&sin, 2), Err(Error::GridTooCoarse { .. })));
}

#[test]
fn integrate_top_examples() {
    let d = t3();
    let vol = hodge_star(&TrigForm::constant(&d, 1.0));
    assert_eq!(integrate_top(&vol).unwrap(), c(1.0));
    let f = TrigForm::sin_mode(&d, &[1, 0, 0], &[], 1.0).unwrap();
    assert_eq!(integrate_top(&vol.mul_fn(&f)).unwrap(), c(0.0));
    assert!(integrate_top(&TrigForm::dx(&d, 0)).is_err());
    assert_eq!(integrate_top(&hodge_star(&TrigForm::constant(&d.reversed(), 1.0))).unwrap(), c(1.0));
    let flipped = TrigForm::from_terms(&d.reversed(), 3, vol.terms().map(|(k, s, v)| (k.clone(), s, v))).unwrap();
    assert_eq!(integrate_top(&flipped).unwrap(), c(-1.0));
}

#[test]
fn complex_structure_on_forms() {
    let d = FlatTorusDomain::euclidean(2).unwrap();
    let j = ComplexStructure::standard(&d).unwrap();
    let (dx, dy) = (TrigForm::dx(&d, 0), TrigForm::dx(&d, 1));
    assert_eq!(apply_j(&dy, &j).unwrap(), -&dx);
    assert_eq!(apply_j(&apply_j(&dx, &j).unwrap(), &j).unwrap(), -&dx);
    // d^c y = -J dy = dx
    assert_eq!(-apply_j(&ext_d(&TrigForm::zero(&d, 0)), &j).unwrap(), TrigForm::zero(&d, 1));
    assert_eq!(-apply_j(&dy, &j).unwrap(), dx);
    let two = wedge(&dx, &dy).unwrap();
    assert!(matches!(apply_j(&two, &j), Err(Error::UnsupportedDegree { .. })));
    let field = apply_j_field(&VectorField::coordinate(&d, 0), &j).unwrap();
    assert_eq!(field.components(), VectorField::coordinate(&d, 1).components());
}

#[test]
fn divide_pointwise_examples() {
    let d = FlatTorusDomain::euclidean(1).unwrap();
    let one = TrigForm::constant(&d, 1.0);
    let sin = TrigForm::sin_mode(&d, &[1], &[], 1.0).unwrap();
    let (q, res) = divide_pointwise(&sin, &one, 9, 4).unwrap();
    assert!(q.distance(&sin) < 1e-15 && res < 1e-15);
    let g = &TrigForm::constant(&d, 2.0) + &TrigForm::cos_mode(&d, &[1], &[], 1.0).unwrap();
    let prod = sin.mul_fn(&g);
    let (q, res) = divide_pointwise(&prod, &g, 65, 30).unwrap();
    assert!(q.distance(&sin) < 1e-10 && res <= 1e-10, "{res}");
    let cos = TrigForm::cos_mode(&d, &[1], &[], 1.0).unwrap();
    match divide_pointwise(&sin, &cos, 8, 3) {
        Err(Error::VanishingDenominator { point, .. }) => assert!((point[0] - 0.25).abs() < 1e-12),
        other => panic!("expected a vanishing denominator, got {other:?}"),
    }
}

#[test]
fn pullback_examples() {
    let d = FlatTorusDomain::euclidean(4).unwrap();
    let a = TrigForm::sin_mode(&d, &[1, 0, 2, 0], &[1], 0.7).unwrap();
    let id = pullback_graph(&a, &TorusMap::identity(4), 9, 4).unwrap();
    assert!(id.form.distance(&a) < 1e-15);
    let tr = pullback_graph(&TrigForm::dx(&d, 2), &TorusMap::translation(vec![0.1, 0.2, 0.3, 0.4]), 9, 4).unwrap();
    assert_eq!(tr.form, TrigForm::dx(&d, 2));
    // (x1, y1, x2, y2) -> (.., y2 + eps sin(2 pi x1))
    let eps = 0.01;
    let zero = TrigForm::zero(&d, 0);
    let w = VectorField::new(vec![
        zero.clone(),
        zero.clone(),
        zero.clone(),
        TrigForm::sin_mode(&d, &[1, 0, 0, 0], &[], eps).unwrap(),
    ])
    .unwrap();
    let map = TorusMap::Displacement(w);
    let pb = pullback_graph(&TrigForm::dx(&d, 3), &map, 5, 2).unwrap();
    let expected = &TrigForm::dx(&d, 3) + &TrigForm::cos_mode(&d, &[1, 0, 0, 0], &[0], 2.0 * PI * eps).unwrap();
    assert!(pb.form.distance(&expected) < 1e-14 && pb.residual < 1e-14);
    // finite differences of the map's last coordinate
    let h = 1e-6;
    let x = [0.3, 0.1, 0.7, 0.2];
    let (yp, _) = map.apply(&[x[0] + h, x[1], x[2], x[3]]);
    let (ym, _) = map.apply(&[x[0] - h, x[1], x[2], x[3]]);
    let fd = (yp[3] - ym[3]) / (2.0 * h);
    assert!((pb.form.eval(&x)[0].re - fd).abs() < 1e-8);
}

#[test]
fn affine_pullback_is_exact() {
    let d = FlatTorusDomain::euclidean(2).unwrap();
    let f = TrigForm::cos_mode(&d, &[1, 0], &[0], 1.0).unwrap();
    let map = TorusMap::Affine { matrix: vec![vec![1, 1], vec![0, 1]], shift: vec![0.25, 0.0] };
    let pb = pullback_graph(&f, &map, 3, 1).unwrap().form;
    let mut r = rng(4);
    for _ in 0..10 {
        let x = [r.gen_range(0.0..1.0), r.gen_range(0.0..1.0)];
        let y = [x[0] + x[1] + 0.25, x[1]];
        let direct = (2.0 * PI * y[0]).cos();
        let v = pb.eval(&x);
        assert!((v[0] - c(direct)).norm() < 1e-13 && (v[1] - c(direct)).norm() < 1e-13);
    }
}

#[test]
fn displacement_guard() {
    let d = FlatTorusDomain::euclidean(1).unwrap();
    let w = VectorField::new(vec![TrigForm::sin_mode(&d, &[1], &[], 0.5).unwrap()]).unwrap();
    let a = TrigForm::cos_mode(&d, &[3], &[], 1.0).unwrap();
    assert!(matches!(pullback_graph(&a, &TorusMap::Displacement(w), 33, 8), Err(Error::Aliasing(_))));
}

#[test]
fn zero_coefficients_are_never_stored() {
    let d = t3();
    let a = TrigForm::dx(&d, 0);
    assert!((&a - &a).is_zero());
    assert_eq!((&a - &a).degree(), 1);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn d_squared_vanishes(seed in any::<u64>(), p in 0usize..3) {
        let mut r = rng(seed);
        let a = random_form(&mut r, &t3(), p, 2, 4);
        prop_assert!(ext_d(&ext_d(&a)).max_abs() <= 1e-12);
    }

    #[test]
    fn leibniz_rule(seed in any::<u64>(), p in 0usize..2, q in 0usize..2) {
        let mut r = rng(seed);
        let d = t3();
        let a = random_form(&mut r, &d, p, 2, 4);
        let b = random_form(&mut r, &d, q, 2, 4);
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = ext_d(&wedge(&a, &b).unwrap());
        let rhs = wedge(&ext_d(&a), &b).unwrap() + wedge(&a, &ext_d(&b)).unwrap().scale_real(sign);
        prop_assert!(lhs.distance(&rhs) <= 1e-11);
    }

    #[test]
    fn graded_commutativity(seed in any::<u64>(), p in 0usize..3, q in 0usize..2) {
        let mut r = rng(seed);
        let d = t3();
        let a = random_form(&mut r, &d, p, 2, 4);
        let b = random_form(&mut r, &d, q, 2, 4);
        let sign = if (p * q) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(wedge(&a, &b).unwrap().distance(&wedge(&b, &a).unwrap().scale_real(sign)) <= 1e-13);
    }

    #[test]
    fn contraction_is_an_antiderivation(seed in any::<u64>(), p in 1usize..3) {
        let mut r = rng(seed);
        let d = t3();
        let x = random_field(&mut r, &d, 1, 2);
        let a = random_form(&mut r, &d, p, 2, 3);
        let b = random_form(&mut r, &d, 1, 2, 3);
        let sign = if p % 2 == 0 { 1.0 } else { -1.0 };
        let lhs = interior(&x, &wedge(&a, &b).unwrap()).unwrap();
        let rhs = wedge(&interior(&x, &a).unwrap(), &b).unwrap()
            + wedge(&a, &interior(&x, &b).unwrap()).unwrap().scale_real(sign);
        prop_assert!(lhs.distance(&rhs) <= 1e-12);
        let two = random_form(&mut r, &d, 2, 2, 3);
        prop_assert!(interior(&x, &interior(&x, &two).unwrap()).unwrap().max_abs() <= 1e-12);
    }

    #[test]
    fn lie_derivative_is_natural(seed in any::<u64>(), p in 0usize..2) {
        let mut r = rng(seed);
        let d = t3();
        let x = random_field(&mut r, &d, 1, 2);
        let a = random_form(&mut r, &d, p, 2, 3);
        let b = random_form(&mut r, &d, 1, 2, 3);
        let lhs = ext_d(&lie_derivative(&x, &a).unwrap());
        let rhs = lie_derivative(&x, &ext_d(&a)).unwrap();
        prop_assert!(lhs.distance(&rhs) <= 1e-10);
        let lw = lie_derivative(&x, &wedge(&a, &b).unwrap()).unwrap();
        let split = wedge(&lie_derivative(&x, &a).unwrap(), &b).unwrap()
            + wedge(&a, &lie_derivative(&x, &b).unwrap()).unwrap();
        prop_assert!(lw.distance(&split) <= 1e-10);
    }

    #[test]
    fn star_star_and_isometry(seed in any::<u64>(), p in 0usize..4) {
        let mut r = rng(seed);
        let g = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.1, 0.2, 1.0, 0.0, 0.1, 0.0, 0.8]);
        let d = FlatTorusDomain::new(g, -1).unwrap();
        let a = random_real_form(&mut r, &d, p, 2, 4);
        let b = random_real_form(&mut r, &d, p, 2, 4);
        let sign = if (p * (3 - p)) % 2 == 0 { 1.0 } else { -1.0 };
        prop_assert!(hodge_star(&hodge_star(&a)).distance(&a.scale_real(sign)) <= 1e-12);
        let lhs = l2_inner(&hodge_star(&a), &hodge_star(&b)).unwrap();
        prop_assert!((lhs - l2_inner(&a, &b).unwrap()).norm() <= 1e-12);
    }

    #[test]
    fn inner_product_is_wedge_star(seed in any::<u64>(), p in 0usize..4) {
        let mut r = rng(seed);
        let g = DMatrix::from_row_slice(3, 3, &[1.5, 0.2, 0.1, 0.2, 1.0, 0.0, 0.1, 0.0, 0.8]);
        let d = FlatTorusDomain::new(g, 1).unwrap();
        let a = random_form(&mut r, &d, p, 2, 4);
        let b = random_form(&mut r, &d, p, 2, 4);
        let top = wedge(&a, &hodge_star(&b.conj())).unwrap();
        let via_star = top.mean_coeff(IndexSet::all(3));
        prop_assert!((via_star - l2_inner(&a, &b).unwrap()).norm() <= 1e-12);
        if !a.is_zero() {
            prop_assert!(l2_inner(&a, &a).unwrap().re > 0.0);
        }
    }

    #[test]
    fn stokes(seed in any::<u64>()) {
        let mut r = rng(seed);
        let b = random_form(&mut r, &t3(), 2, 2, 5);
        prop_assert!(integrate_top(&ext_d(&b)).unwrap().norm() <= 1e-14);
    }

    #[test]
    fn sample_project_round_trip(seed in any::<u64>(), p in 0usize..3) {
        let mut r = rng(seed);
        let a = random_form(&mut r, &t3(), p, 2, 5);
        let vals = sample(&a, 7).unwrap();
        let (back, res) = project(a.domain(), p, vals, 7, 3).unwrap();
        prop_assert!(back.distance(&a) <= 1e-13 && res <= 1e-13);
    }

    #[test]
    fn json_round_trip(seed in any::<u64>(), p in 0usize..4) {
        let mut r = rng(seed);
        let d = t3();
        let a = random_form(&mut r, &d, p, 3, 6);
        prop_assert_eq!(TrigForm::from_json(&d, &a.to_json()).unwrap(), a);
    }

    #[test]
    fn real_forms_stay_real(seed in any::<u64>()) {
        let mut r = rng(seed);
        let d = t3();
        let a = random_real_form(&mut r, &d, 1, 2, 4);
        let b = random_real_form(&mut r, &d, 1, 2, 4);
        prop_assert!(a.is_real(1e-15));
        prop_assert!(wedge(&a, &b).unwrap().is_real(1e-14));
        prop_assert!(ext_d(&a).is_real(1e-14));
        prop_assert!(hodge_star(&a).is_real(1e-14));
    }
}
