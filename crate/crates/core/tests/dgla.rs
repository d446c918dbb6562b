mod common;

use common::*;
use folideform::dgla::*;
use folideform::forms::*;
use folideform::Error;
use proptest::prelude::*;
use rand::Rng;
use std::f64::consts::PI;

fn sign(p: usize) -> f64 {
    if p % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// `gamma = cos(2 pi x3) dx1 + sin(2 pi x3) dx2` with the matching unit field.
fn contact_couple() -> DefiningCouple {
    let d = t3();
    let cos = TrigForm::cos_mode(&d, &[0, 0, 1], &[], 1.0).unwrap();
    let sin = TrigForm::sin_mode(&d, &[0, 0, 1], &[], 1.0).unwrap();
    let gamma = &TrigForm::dx(&d, 0).mul_fn(&cos) + &TrigForm::dx(&d, 1).mul_fn(&sin);
    let zero = TrigForm::zero(&d, 0);
    DefiningCouple::new(gamma, VectorField::new(vec![cos, sin, zero]).unwrap()).unwrap()
}

/// `(e^lambda ds, e^{-lambda} d/ds)` on T^3 with `s = x3`.
fn twisted_couple() -> (DefiningCouple, TrigForm) {
    let d = t3();
    let lambda = &TrigForm::cos_mode(&d, &[1, 0, 0], &[], 0.05).unwrap()
        + &TrigForm::sin_mode(&d, &[0, 0, 1], &[], 0.05).unwrap();
    let full = psi_couple(&DefiningCouple::coordinate(&d, 2), &lambda).unwrap();
    let c = DefiningCouple::with_tolerance(full.gamma().chop(1e-13), full.x().chop(1e-13), 1e-10).unwrap();
    (c, lambda)
}

/// `gamma = ds - sin(2 pi s) dx1` on T^2 = (x1, s); the leaf `s = 0` is compact.
fn holonomy_couple() -> DefiningCouple {
    let d = FlatTorusDomain::euclidean(2).unwrap();
    let g = TrigForm::sin_mode(&d, &[0, 1], &[0], 1.0).unwrap();
    DefiningCouple::new(&TrigForm::dx(&d, 1) - &g, VectorField::coordinate(&d, 1)).unwrap()
}

fn random_z(r: &mut rand_chacha::ChaCha8Rng, c: &DefiningCouple, p: usize) -> TrigForm {
    project_z(&random_real_form(r, c.domain(), p, 2, 4), c).unwrap()
}

#[test]
fn couple_requires_unit_pairing() {
    let d = t3();
    let bad = DefiningCouple::new(TrigForm::dx(&d, 0).scale_real(2.0), VectorField::coordinate(&d, 0));
    assert!(matches!(bad, Err(Error::InvalidCouple(_))));
    let c = contact_couple();
    assert_eq!(interior(c.x(), c.gamma()).unwrap(), TrigForm::constant(c.domain(), 1.0));
}

#[test]
fn bracket_examples() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    assert!(bracket(c.gamma(), c.gamma(), c.x()).unwrap().is_zero());
    let beta = &TrigForm::sin_mode(&d, &[0, 0, 1], &[0], 1.0).unwrap()
        + &TrigForm::cos_mode(&d, &[0, 0, 1], &[1], 1.0).unwrap();
    let bb = bracket(&beta, &beta, c.x()).unwrap();
    let expected = wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 1)).unwrap().scale_real(4.0 * PI);
    assert!(bb.distance(&expected) < 1e-13, "{bb:?}");
    // independent route: {b, b} = 2 i_X d b ^ b when i_X b = 0
    let via_contraction = wedge(&interior(c.x(), &ext_d(&beta)).unwrap(), &beta).unwrap().scale_real(2.0);
    assert!(bb.distance(&via_contraction) < 1e-13);
}

#[test]
fn frobenius_examples() {
    let d = t3();
    let r = frobenius_checks(&DefiningCouple::coordinate(&d, 2), 1e-12).unwrap();
    assert!(r.integrable && r.consistent);
    assert_eq!((r.wedge_residual, r.contraction_residual, r.bracket_residual), (0.0, 0.0, 0.0));

    let c = contact_couple();
    let dgg = wedge(&ext_d(c.gamma()), c.gamma()).unwrap();
    assert!(dgg.len() == 1);
    assert!((dgg.mean_coeff(IndexSet::all(3)) - C64::new(-2.0 * PI, 0.0)).norm() < 1e-10);
    let r = frobenius_checks(&c, 1e-12).unwrap();
    assert!(!r.integrable && r.consistent);
    assert!(r.wedge_residual > 1.0 && r.contraction_residual > 1.0 && r.bracket_residual > 1.0);

    let lin = &TrigForm::dx(&d, 0) + &TrigForm::dx(&d, 1).scale_real(2.0);
    let c = DefiningCouple::new(lin, VectorField::coordinate(&d, 0)).unwrap();
    assert!(frobenius_checks(&c, 1e-12).unwrap().integrable);
}

/// `d gamma ^ gamma` sampled on a grid against the analytic contact value.
#[test]
fn contact_form_pointwise() {
    let c = contact_couple();
    let dg = ext_d(c.gamma());
    let mut r = rng(9);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let g = c.gamma().eval(&x);
        let w = dg.eval(&x);
        // basis order of 2-forms: {12, 13, 23}
        let top = w[0] * g[2] - w[1] * g[1] + w[2] * g[0];
        assert!((top - C64::new(-2.0 * PI, 0.0)).norm() < 1e-12);
    }
}

#[test]
fn delta_examples() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    let mut r = rng(10);
    let f = random_real_form(&mut r, &d, 0, 2, 5);
    let expected = &ext_d(&f) - &TrigForm::dx(&d, 2).mul_fn(&f.partial(2));
    assert!(delta(&f, &c).unwrap().distance(&expected) < 1e-12);
    let (tw, _) = twisted_couple();
    let one = TrigForm::constant(&d, 1.0);
    assert!(delta(&one, &tw).unwrap().distance(&tw.b_form()) < 1e-12);
    assert!(!tw.b_form().is_zero());
}

#[test]
fn in_z_examples() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    assert!(in_z(&TrigForm::dx(&d, 0), &c));
    assert!(!in_z(c.gamma(), &c));
    assert!(in_z(&TrigForm::sin_mode(&d, &[0, 0, 1], &[1], 1.0).unwrap(), &c));
    assert!(matches!(d_b(c.gamma(), &c), Err(Error::NotInZ(_))));
}

#[test]
fn d_b_examples() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    let f = TrigForm::cos_mode(&d, &[0, 0, 3], &[], 1.0).unwrap();
    assert!(d_b(&f, &c).unwrap().is_zero());
    let (tw, _) = twisted_couple();
    assert!(d_b(&tw.b_form(), &tw).unwrap().max_abs() < 1e-12);
}

#[test]
fn c_class_of_product_and_twisted_couples() {
    let d = t3();
    let r = c_class(&DefiningCouple::coordinate(&d, 2), 2, 1e-10).unwrap();
    assert!(r.vanishes && r.witness.as_ref().unwrap().is_zero());

    let (tw, _) = twisted_couple();
    let r = c_class(&tw, 2, 1e-10).unwrap();
    assert!(r.vanishes, "residual {}", r.residual);
    let lambda = r.witness.unwrap();
    assert!((d_b(&lambda, &tw).unwrap() - tw.b_form()).norm() < 1e-10);
    assert!(r.condition_iii.unwrap() < 1e-10);
}

/// On the compact leaf `s = 0`, `b` restricts to `-2 pi dx1`, which is not leafwise exact.
#[test]
fn c_class_obstructed_by_holonomy() {
    let c = holonomy_couple();
    let b = c.b_form();
    let expected = TrigForm::cos_mode(c.domain(), &[0, 1], &[0], -2.0 * PI).unwrap();
    assert!(b.distance(&expected) < 1e-13);
    for bw in [3, 6] {
        let r = c_class(&c, bw, 1e-10).unwrap();
        assert!(!r.vanishes && r.witness.is_none());
        assert!(r.residual > 1e-2 && r.obstruction_norm > 1e-2);
    }
}

#[test]
fn c_class_rejects_non_integrable() {
    assert!(matches!(c_class(&contact_couple(), 2, 1e-10), Err(Error::NotIntegrable(_))));
}

#[test]
fn psi_and_theta_identities() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    let mut r = rng(11);
    let a = random_z(&mut r, &c, 1);
    let zero = TrigForm::zero(&d, 0);
    assert_eq!(psi_transform(&a, &zero, &c).unwrap().0, a);
    let v0 = VectorField::zero(&d);
    assert_eq!(theta_transform(&a, &v0, &c).unwrap(), a);
    assert!(matches!(theta_transform(&a, &VectorField::coordinate(&d, 2), &c), Err(Error::Precondition(_))));
}

#[test]
fn psi_intertwines_delta_and_bracket() {
    let (c, _) = twisted_couple();
    let lambda = TrigForm::sin_mode(c.domain(), &[0, 1, 0], &[], 0.05).unwrap();
    let target = psi_couple(&c, &lambda).unwrap();
    let mut r = rng(12);
    for p in 0..2 {
        let a = random_z(&mut r, &c, p);
        let b = random_z(&mut r, &c, 1);
        let (pa, tail) = psi_transform(&a, &lambda, &c).unwrap();
        let lhs = psi_transform(&delta(&a, &c).unwrap(), &lambda, &c).unwrap().0;
        let rhs = delta(&pa, &target).unwrap();
        assert!(lhs.distance(&rhs) < 1e-10 + tail, "{}", lhs.distance(&rhs));
        let pb = psi_transform(&b, &lambda, &c).unwrap().0;
        let lhs = psi_transform(&bracket(&a, &b, c.x()).unwrap(), &lambda, &c).unwrap().0;
        let rhs = bracket(&pa, &pb, target.x()).unwrap();
        assert!(lhs.distance(&rhs) < 1e-10);
    }
}

#[test]
fn theta_intertwines_delta() {
    let (c, _) = twisted_couple();
    let d = c.domain().clone();
    let v = VectorField::new(vec![
        TrigForm::cos_mode(&d, &[0, 1, 0], &[], 0.2).unwrap(),
        TrigForm::constant(&d, 0.1),
        TrigForm::zero(&d, 0),
    ])
    .unwrap();
    let shifted = DefiningCouple::new(c.gamma().clone(), c.x().add(&v)).unwrap();
    let mut r = rng(13);
    for p in 0..3 {
        let a = random_z(&mut r, &c, p);
        let ta = theta_transform(&a, &v, &c).unwrap();
        assert!(in_z(&ta, &shifted));
        let lhs = theta_transform(&delta(&a, &c).unwrap(), &v, &c).unwrap();
        let rhs = delta(&ta, &shifted).unwrap();
        assert!(lhs.distance(&rhs) < 1e-10, "degree {p}: {}", lhs.distance(&rhs));
        let back = theta_transform(&ta, &v.scale_real(-1.0), &shifted).unwrap();
        assert!(back.distance(&a) < 1e-12);
    }
}

#[test]
fn f_v_keeps_the_kernel_and_mc() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    let s = TrigForm::sin_mode(&d, &[0, 0, 1], &[], 1.0).unwrap();
    let a = (&TrigForm::dx(&d, 0) + &TrigForm::dx(&d, 1).scale_real(3.0)).mul_fn(&s).scale_real(0.2);
    let v_perp = VectorField::new(vec![
        TrigForm::constant(&d, 3.0),
        TrigForm::constant(&d, -1.0),
        TrigForm::zero(&d, 0),
    ])
    .unwrap();
    let (same, _) = f_v_transform(&a, &v_perp, &c, 16, 6).unwrap();
    assert!(same.distance(&a) < 1e-13);

    let v = VectorField::coordinate(&d, 0).scale_real(0.5);
    let (fa, res) = f_v_transform(&a, &v, &c, 64, 30).unwrap();
    assert!(res < 1e-8);
    let g1 = c.gamma() + &fa;
    let g2 = c.gamma() + &a;
    let mut r = rng(14);
    for _ in 0..20 {
        let x: Vec<f64> = (0..3).map(|_| r.gen_range(0.0..1.0)).collect();
        let (u, w) = (g1.eval(&x), g2.eval(&x));
        for i in 0..3 {
            for j in i + 1..3 {
                assert!((u[i] * w[j] - u[j] * w[i]).norm() < 1e-8);
            }
        }
    }
    let mc = |b: &TrigForm| (delta(b, &c).unwrap() + bracket(b, b, c.x()).unwrap().scale_real(0.5)).norm();
    assert!(mc(&a) < 1e-12);
    assert!(mc(&fa) < 1e-7, "{}", mc(&fa));
}

#[test]
fn delta_c_examples() {
    let d = t3();
    let c = DefiningCouple::coordinate(&d, 2);
    let k = LeafwiseJ::from_pairs(&d, &[(0, 1)]).unwrap();
    k.validate(&c).unwrap();
    assert!(delta_c(&TrigForm::constant(&d, 2.0), &c, &k).unwrap().is_zero());
    let p = TrigForm::sin_mode(&d, &[1, 0, 0], &[], 1.0).unwrap();
    let dc = delta_c(&p, &c, &k).unwrap();
    let expected = TrigForm::cos_mode(&d, &[1, 0, 0], &[1], -2.0 * PI).unwrap();
    assert!(dc.distance(&expected) < 1e-13);
    // pointwise: (delta^c p)(V) = (delta p)(J V) with J d1 = d2, J d2 = -d1
    let dp = delta(&p, &c).unwrap();
    let x = [0.17, 0.4, 0.9];
    let (u, w) = (dc.eval(&x), dp.eval(&x));
    assert!((u[0] - w[1]).norm() < 1e-13 && (u[1] + w[0]).norm() < 1e-13);
    assert!(matches!(
        delta_c(&wedge(&TrigForm::dx(&d, 0), &TrigForm::dx(&d, 1)).unwrap(), &c, &k),
        Err(Error::UnsupportedDegree { .. })
    ));
    let bad = LeafwiseJ::from_pairs(&d, &[(0, 2)]).unwrap();
    assert!(bad.validate(&c).is_err());
}

#[test]
fn delta_c_closed_form_on_functions() {
    let (c, _) = twisted_couple();
    let k = LeafwiseJ::from_pairs(c.domain(), &[(0, 1)]).unwrap();
    let mut r = rng(15);
    for _ in 0..10 {
        let p = random_real_form(&mut r, c.domain(), 0, 2, 4);
        let lhs = delta_c(&p, &c, &k).unwrap();
        let rhs = d_b_c(&p, &c, &k).unwrap() - k.apply(&c.b_form()).mul_fn(&p);
        assert!(lhs.distance(&rhs) < 1e-11);
        assert!(in_z(&lhs, &c));
    }
}

#[test]
fn exp_series_of_constant_is_exact() {
    let d = t3();
    let (e, tail) = exp_series(&TrigForm::constant(&d, 0.5)).unwrap();
    assert!((e.mean_coeff(IndexSet::EMPTY).re - 0.5f64.exp()).abs() < 1e-15 && tail < 1e-15);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dgla_axioms(seed in any::<u64>(), p in 0usize..3, q in 0usize..3, s in 0usize..3) {
        prop_assume!(p + q <= 3);
        let mut r = rng(seed);
        let d = t3();
        let x = random_field(&mut r, &d, 1, 3);
        let a = random_form(&mut r, &d, p, 2, 3);
        let b = random_form(&mut r, &d, q, 2, 3);
        let c = random_form(&mut r, &d, s, 2, 3);
        let br = |u: &TrigForm, v: &TrigForm| bracket(u, v, &x).unwrap();
        prop_assert!(br(&a, &b).distance(&br(&b, &a).scale_real(-sign(p * q))) <= 1e-11);
        if p + q + s <= 3 {
            let jac = br(&a, &br(&b, &c)).scale_real(sign(p * s))
                + br(&b, &br(&c, &a)).scale_real(sign(q * p))
                + br(&c, &br(&a, &b)).scale_real(sign(s * q));
            prop_assert!(jac.max_abs() <= 1e-11 * (1.0 + a.max_abs() * b.max_abs() * c.max_abs()) * 1e3);
        }
        if p + q < 3 {
            let lhs = ext_d(&br(&a, &b));
            let rhs = br(&ext_d(&a), &b) + br(&a, &ext_d(&b)).scale_real(sign(p));
            prop_assert!(lhs.distance(&rhs) <= 1e-9);
        }
    }

    #[test]
    fn twisted_square_is_curvature(seed in any::<u64>(), p in 0usize..2) {
        let mut r = rng(seed);
        let d = t3();
        let x = random_field(&mut r, &d, 1, 3);
        let a = random_form(&mut r, &d, 1, 1, 3);
        let w = random_form(&mut r, &d, p, 1, 3);
        let da = |u: &TrigForm| ext_d(u) + bracket(&a, u, &x).unwrap();
        let curv = ext_d(&a) + bracket(&a, &a, &x).unwrap().scale_real(0.5);
        let lhs = da(&da(&w));
        let rhs = bracket(&curv, &w, &x).unwrap();
        prop_assert!(lhs.distance(&rhs) <= 1e-9);
    }

    #[test]
    fn frobenius_conditions_agree(seed in any::<u64>(), integrable in any::<bool>()) {
        let mut r = rng(seed);
        let d = t3();
        let eta = if integrable {
            let f = random_real_form(&mut r, &d, 0, 2, 4).filter(|k, _| k[2] == 0);
            ext_d(&f)
        } else {
            let e = random_real_form(&mut r, &d, 1, 2, 4).filter(|_, s| !s.contains(2));
            e.scale_real(1.0 / e.max_abs().max(1e-3))
        };
        prop_assume!(!eta.is_zero());
        let c = DefiningCouple::new(&TrigForm::dx(&d, 2) + &eta, VectorField::coordinate(&d, 2)).unwrap();
        let rep = frobenius_checks(&c, 1e-10).unwrap();
        prop_assert!(rep.consistent);
        if integrable {
            prop_assert!(rep.integrable);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]
    #[test]
    fn delta_on_integrable_couple(seed in any::<u64>(), p in 0usize..2) {
        let mut r = rng(seed);
        let (c, _) = twisted_couple();
        let a = random_z(&mut r, &c, p);
        let da = delta(&a, &c).unwrap();
        prop_assert!(delta(&da, &c).unwrap().max_abs() <= 1e-9);
        prop_assert!(in_z(&da, &c) || z_defect(&da, &c) <= 1e-11);
        let rel = &da - &(d_b(&a, &c).unwrap() + wedge(&c.b_form(), &a).unwrap());
        prop_assert!(rel.max_abs() <= 1e-11);
        let db = d_b(&a, &c).unwrap();
        prop_assert!(d_b(&project_z(&db, &c).unwrap(), &c).unwrap().max_abs() <= 1e-9);
    }
}
