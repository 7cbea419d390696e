use innerfluc::action::{minimize_toy, stabilizer_dim, v_trace, ActionParams};
use innerfluc::io::{parse_model, read_csv, to_json, write_csv, ModelFile};
use innerfluc::matrix::ComplexMatrix;
use innerfluc::optimize::MinimizeOptions;
use innerfluc::perturbation::{a1, fluctuate, fluctuation_terms, random_pert, random_self_adjoint_one_form, PertElement};
use innerfluc::toy::{a_ev, a_f, build_toy, closed_dirac, extract_fields, full_algebra, y_block, FieldPoint, ToyParams};
use innerfluc::triple::{check_first_order, check_zeroth_order};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex() -> impl Strategy<Value = Complex64> {
    (-2.0..2.0f64, -2.0..2.0f64).prop_map(|(re, im)| Complex64::new(re, im))
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = ComplexMatrix> {
    prop::collection::vec(complex(), rows * cols).prop_map(move |v| ComplexMatrix::new(rows, cols, v).unwrap())
}

fn close(a: &ComplexMatrix, b: &ComplexMatrix, rel: f64) -> bool {
    (a - b).frob_norm() <= rel * a.frob_norm().max(b.frob_norm()).max(1.0)
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn defect_matrix(t: &innerfluc::triple::FiniteSpectralTriple, a: &innerfluc::algebra::AlgebraElement, b: &innerfluc::algebra::AlgebraElement) -> ComplexMatrix {
    let da = t.d().commutator(&t.represent(a).unwrap()).unwrap();
    da.commutator(&t.represent_opposite(b).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn kron_mixed_product(a in matrix(2, 3), b in matrix(2, 2), c in matrix(3, 2), d in matrix(2, 3)) {
        let lhs = &a.kron(&b) * &c.kron(&d);
        let rhs = (&a * &c).kron(&(&b * &d));
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn adjoint_reverses_products(a in matrix(3, 4), b in matrix(4, 2)) {
        prop_assert!(close(&(&a * &b).adjoint(), &(&b.adjoint() * &a.adjoint()), 1e-12));
    }

    #[test]
    fn hat_is_antilinear_and_multiplicative(t1 in matrix(8, 8), t2 in matrix(8, 8), l in complex()) {
        let t = build_toy(&ToyParams::unit());
        prop_assert!(close(&t.hat(&t1.scale(l)), &t.hat(&t1).scale(l.conj()), 1e-12));
        prop_assert!(close(&t.hat(&(&t1 * &t2)), &(&t.hat(&t1) * &t.hat(&t2)), 1e-12));
        prop_assert!((t.hat(&t1).frob_norm() - t1.frob_norm()).abs() < 1e-12 * t1.frob_norm().max(1.0));
    }

    #[test]
    fn represent_is_star_homomorphism(seed in any::<u64>()) {
        let t = build_toy(&ToyParams::unit());
        let mut r = rng(seed);
        let a = t.algebra().random_element(&mut r);
        let b = t.algebra().random_element(&mut r);
        let pa = t.represent(&a).unwrap();
        prop_assert!(close(&t.represent(&a.mul(&b)).unwrap(), &(&pa * &t.represent(&b).unwrap()), 1e-12));
        prop_assert!(close(&t.represent(&a.star()).unwrap(), &pa.adjoint(), 1e-12));
    }

    #[test]
    fn first_order_defect_is_linear_in_k_y(kx in complex(), ky in complex()) {
        prop_assume!(ky.norm() > 1e-3);
        let d1 = check_first_order(&build_toy(&ToyParams::new(kx, ky)), Some(&a_ev()), 1e-12).unwrap();
        let d2 = check_first_order(&build_toy(&ToyParams::new(kx, ky * 2.0)), Some(&a_ev()), 1e-12).unwrap();
        let f = check_first_order(&build_toy(&ToyParams::new(kx, ky)), Some(&a_f()), 1e-12).unwrap();
        prop_assert!(d1.max_defect > 0.0 && !d1.passed);
        prop_assert!((d2.max_defect - 2.0 * d1.max_defect).abs() < 1e-12 * d2.max_defect);
        prop_assert!(f.max_defect < 1e-12);
        let z = check_zeroth_order(&build_toy(&ToyParams::new(kx, ky)), Some(&full_algebra()), 1e-12).unwrap();
        prop_assert!(z.passed);
    }

    #[test]
    fn first_order_defect_is_bilinear(seed in any::<u64>(), s in complex()) {
        let t = build_toy(&ToyParams::unit());
        let mut r = rng(seed);
        let spec = a_ev();
        let (a1e, a2e, b) = (spec.random_element(&mut r), spec.random_element(&mut r), spec.random_element(&mut r));
        let lhs = defect_matrix(&t, &a1e.scale(s).add(&a2e), &b);
        let rhs = &defect_matrix(&t, &a1e, &b).scale(s) + &defect_matrix(&t, &a2e, &b);
        prop_assert!(close(&lhs, &rhs, 1e-12));
        let lhs = defect_matrix(&t, &b, &a1e.scale(s).add(&a2e));
        let rhs = &defect_matrix(&t, &b, &a1e).scale(s) + &defect_matrix(&t, &b, &a2e);
        prop_assert!(close(&lhs, &rhs, 1e-12));
    }

    #[test]
    fn pert_semigroup_laws(seed in any::<u64>(), alpha in -1.0..2.0f64) {
        let spec = a_ev();
        let mut r = rng(seed);
        let (p, q, s) = (random_pert(&spec, &mut r, 2), random_pert(&spec, &mut r, 2), random_pert(&spec, &mut r, 1));
        let left = p.mul(&q).unwrap().mul(&s).unwrap().canonical_form();
        let right = p.mul(&q.mul(&s).unwrap()).unwrap().canonical_form();
        prop_assert!(close(&left, &right, 1e-12));
        let unit = PertElement::unit(&spec);
        prop_assert!(close(&unit.mul(&p).unwrap().canonical_form(), &p.canonical_form(), 1e-12));
        prop_assert!(close(&p.mul(&unit).unwrap().canonical_form(), &p.canonical_form(), 1e-12));
        for x in [p.mul(&q).unwrap(), p.affine_combine(&q, alpha).unwrap()] {
            prop_assert!(x.is_normalized(1e-10));
            prop_assert!(x.is_self_adjoint(1e-10));
        }
    }

    #[test]
    fn fluctuate_is_self_adjoint(seed in any::<u64>(), kx in complex(), ky in complex(), k in 1usize..5) {
        let t = build_toy(&ToyParams::new(kx, ky));
        let w = random_self_adjoint_one_form(&a_ev(), &mut rng(seed), k);
        let d = fluctuate(&t, &w).unwrap();
        prop_assert!(d.hermiticity_defect() < 1e-12 * d.frob_norm().max(1.0));
    }

    #[test]
    fn first_order_case_reduces(seed in any::<u64>(), kx in complex(), k in 1usize..4) {
        let t = build_toy(&ToyParams::new(kx, Complex64::new(0.0, 0.0)));
        let w = random_self_adjoint_one_form(&a_ev(), &mut rng(seed), k);
        let terms = fluctuation_terms(&t, &w).unwrap();
        prop_assert!(terms.a2.frob_norm() < 1e-12 * terms.d_prime.frob_norm().max(1.0));
        let a = a1(&t, &w).unwrap();
        let jaj = t.j().conjugate(&a).unwrap().scale_real(t.eps_d());
        let expected = &(t.d() + &a) + &jaj;
        prop_assert!(close(&fluctuate(&t, &w).unwrap(), &expected, 1e-12));
    }

    #[test]
    fn extract_fields_is_additive(s1 in any::<u64>(), s2 in any::<u64>()) {
        let spec = a_ev();
        let w1 = random_self_adjoint_one_form(&spec, &mut rng(s1), 2);
        let w2 = random_self_adjoint_one_form(&spec, &mut rng(s2), 3);
        let (f1, f2, f12) = (extract_fields(&w1).unwrap(), extract_fields(&w2).unwrap(), extract_fields(&w1.concat(&w2)).unwrap());
        let one = Complex64::new(1.0, 0.0);
        prop_assert!((f12.x - one - (f1.x - one) - (f2.x - one)).norm() < 1e-12);
        prop_assert!((f12.v1 - one - (f1.v1 - one) - (f2.v1 - one)).norm() < 1e-12);
        prop_assert!((f12.v2 - f1.v2 - f2.v2).norm() < 1e-12);
    }

    #[test]
    fn y_block_has_rank_one(kx in complex(), ky in complex(), x in complex(), v1 in complex(), v2 in complex()) {
        prop_assume!(ky.norm() > 1e-2 && (v1.norm_sqr() + v2.norm_sqr()) > 1e-4);
        let sv = y_block(&closed_dirac(&ToyParams::new(kx, ky), &FieldPoint::new(x, v1, v2))).singular_values();
        let (hi, lo) = (sv[0].max(sv[1]), sv[0].min(sv[1]));
        prop_assert!(lo < 1e-12 * hi);
    }

    #[test]
    fn potential_is_phase_invariant(kx in complex(), ky in complex(), x in complex(), v1 in complex(), v2 in complex(),
                                    t in prop::array::uniform3(-3.2..3.2f64)) {
        let (p, ap) = (ToyParams::new(kx, ky), ActionParams::unit());
        let base = v_trace(&p, &ap, &FieldPoint::new(x, v1, v2)).unwrap();
        let ph = |z: Complex64, a: f64| z * Complex64::from_polar(1.0, a);
        let moved = v_trace(&p, &ap, &FieldPoint::new(ph(x, t[0]), ph(v1, t[1]), ph(v2, t[2]))).unwrap();
        prop_assert!((moved - base).abs() <= 1e-9 * base.abs().max(1e-3));
    }

    #[test]
    fn stabilizer_is_scale_invariant(c in prop::array::uniform3(-1.5..1.5f64), scale in 0.01..100.0f64) {
        let p = ToyParams::unit();
        let t = build_toy(&p);
        let d = closed_dirac(&p, &FieldPoint::from_real_coords(c));
        let ev = a_ev();
        prop_assert_eq!(stabilizer_dim(&t, &d, &ev).unwrap(), stabilizer_dim(&t, &d.scale_real(scale), &ev).unwrap());
    }

    #[test]
    fn model_round_trip_is_bitwise(kx in complex(), ky in complex()) {
        let m = ModelFile::toy(&ToyParams::new(kx, ky));
        let t = m.to_triple().unwrap();
        let again = parse_model(&to_json(&ModelFile::from_triple(&t)), "m.json").unwrap().to_triple().unwrap();
        prop_assert_eq!(again.d(), t.d());
        prop_assert_eq!(again.j().matrix(), t.j().matrix());
        prop_assert_eq!(again.gamma(), t.gamma());
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(prop::array::uniform3(prop::num::f64::NORMAL), 0..20)) {
        let mut buf = Vec::new();
        write_csv(&mut buf, &rows).unwrap();
        let text = String::from_utf8(buf).unwrap();
        prop_assert!(text.starts_with("coord1,coord2,V\n"));
        prop_assert!(!text.contains('\r'));
        prop_assert_eq!(text.lines().count(), rows.len() + 1);
        prop_assert_eq!(read_csv(&text).unwrap(), rows);
    }
}

#[test]
fn minimize_is_deterministic_and_stable() {
    let (p, ap) = (ToyParams::unit(), ActionParams::unit());
    let opts = MinimizeOptions::default();
    let a = minimize_toy(&p, &ap, &opts).unwrap();
    let b = minimize_toy(&p, &ap, &opts).unwrap();
    assert_eq!(a.points.len(), b.points.len());
    for (x, y) in a.points.iter().zip(&b.points) {
        assert_eq!(x.coords, y.coords);
        assert_eq!(x.value, y.value);
    }
    let doubled = minimize_toy(&p, &ap, &MinimizeOptions { starts: 64, ..opts.clone() }).unwrap();
    assert_eq!(doubled.points.len(), a.points.len());
    for (x, y) in a.points.iter().zip(&doubled.points) {
        let dist = x.coords.iter().zip(&y.coords).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
        assert!(dist < 1e-6, "{:?} vs {:?}", x.coords, y.coords);
    }
}
