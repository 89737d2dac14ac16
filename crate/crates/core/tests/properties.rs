use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use tsmkit_core::group::{group_law, twist_coefficients, GroupPoint, StepTwoGroup};
use tsmkit_core::harmonics::harmonic_decompose_pq;
use tsmkit_core::poly::{BiPolynomial, Monomial};
use tsmkit_core::radial::{apply_z_reduced, build_stack, default_schedule, RadialSum, TypeFunction};
use tsmkit_core::reduce::{phase_identity_check, reduce, reduce_group};

fn skew(d: usize, entries: &[f64]) -> DMatrix<f64> {
    let mut u = DMatrix::zeros(d, d);
    let mut it = entries.iter();
    for r in 0..d {
        for c in r + 1..d {
            let v = *it.next().unwrap();
            u[(r, c)] = v;
            u[(c, r)] = -v;
        }
    }
    u
}

fn entries(count: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-2.0f64..2.0, count)
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n)
        .prop_map(|v| v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect())
}

fn bihomogeneous(n: usize, p: u32, q: u32, coeffs: &[(f64, f64)]) -> BiPolynomial {
    // every monomial of bidegree (p, q) in n = 2 variables
    assert_eq!(n, 2);
    let mut out = BiPolynomial::zero(n);
    let mut k = 0;
    for a0 in 0..=p {
        for b0 in 0..=q {
            let (re, im) = coeffs[k % coeffs.len()];
            k += 1;
            let m = Monomial::new(vec![a0, p - a0], vec![b0, q - b0]);
            out.add_term(m, Complex64::new(re, im));
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn group_law_is_associative(u in entries(2 * 6), pts in prop::collection::vec(-1.0f64..1.0, 3 * 6)) {
        let g = StepTwoGroup::new(2, 2, vec![skew(4, &u[..6]), skew(4, &u[6..])]).unwrap();
        let point = |i: usize| GroupPoint { x: pts[6 * i..6 * i + 4].to_vec(), t: pts[6 * i + 4..6 * i + 6].to_vec() };
        let (a, b, c) = (point(0), point(1), point(2));
        let left = group_law(&g, &group_law(&g, &a, &b).unwrap(), &c).unwrap();
        let right = group_law(&g, &a, &group_law(&g, &b, &c).unwrap()).unwrap();
        for (l, r) in left.x.iter().chain(&left.t).zip(right.x.iter().chain(&right.t)) {
            prop_assert!((l - r).abs() <= 1e-12);
        }
        let e = group_law(&g, &a, &a.inverse()).unwrap();
        prop_assert!(e.x.iter().chain(&e.t).all(|v| v.abs() <= 1e-15));
    }

    #[test]
    fn eta_diagonal_vanishes(u in entries(3 * 15), lambda in prop::collection::vec(-2.0f64..2.0, 3)) {
        let mats = (0..3).map(|j| skew(6, &u[15 * j..15 * (j + 1)])).collect();
        let g = StepTwoGroup::new(3, 3, mats).unwrap();
        let table = twist_coefficients(&g, &lambda).unwrap();
        prop_assert!(table.max_eta_diag() <= 1e-12);
    }

    #[test]
    fn reduction_invariants(u in entries(15)) {
        let v = skew(6, &u);
        prop_assume!(v.determinant().abs() > 1e-3);
        let frame = reduce(&v).unwrap();
        prop_assert!(frame.orthogonality_residual() <= 1e-10);
        prop_assert!(frame.conjugation_residual() <= 1e-10 * v.norm().max(1.0));
        prop_assert!(frame.mu.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(frame.mu.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn phase_identity(lambda in prop::collection::vec(-2.0f64..2.0, 3), z in cvec(2), w in cvec(2)) {
        prop_assume!(lambda.iter().map(|x| x * x).sum::<f64>() > 1e-2);
        let g = StepTwoGroup::quaternionic();
        let frame = reduce_group(&g, &lambda).unwrap();
        let check = phase_identity_check(&g, &frame, &z, &w).unwrap();
        prop_assert!(check.residual <= 1e-12);
    }

    #[test]
    fn decomposition_reconstructs(p in 0u32..4, q in 0u32..4, coeffs in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..20)) {
        let poly = bihomogeneous(2, p, q, &coeffs);
        let layers = harmonic_decompose_pq(&poly, p, q).unwrap();
        let diff = &layers.reconstruct() - &poly;
        prop_assert!(diff.max_abs_coeff() <= 1e-12);
        prop_assert!(layers.max_laplacian() <= 1e-12);
    }

    #[test]
    fn operator_stack_is_linear(
        c in (-1.0f64..1.0, -1.0f64..1.0),
        a1 in -1.0f64..-0.1,
        a2 in -1.0f64..-0.1,
        rho in 0.2f64..2.0,
        p in 1usize..3,
        q in 0usize..3,
    ) {
        let c = Complex64::new(c.0, c.1);
        let nu = Complex64::new(-1.0, 0.3);
        let stack = build_stack(p, q, 2, Some(&default_schedule(p, q, 2)), nu, nu).unwrap();
        let f = RadialSum::term(Complex64::new(1.0, 0.0), Complex64::new(a1, 0.0), 2);
        let g = RadialSum::term(Complex64::new(0.5, -0.2), Complex64::new(a2, 0.0), -1);
        let combined = stack.apply(&f.add(&g.scale(c))).eval(rho);
        let separate = stack.apply(&f).eval(rho) + c * stack.apply(&g).eval(rho);
        prop_assert!((combined - separate).norm() <= 1e-9 * separate.norm().max(1.0));
    }

    #[test]
    fn reduced_field_matches_difference_quotient(
        mu in 0.2f64..3.0,
        a in -1.0f64..-0.1,
        z in cvec(2),
        bar in any::<bool>(),
    ) {
        let n = 2;
        let poly = &BiPolynomial::z(n, 0) * &BiPolynomial::zbar(n, 1);
        let f = TypeFunction::new(RadialSum::gaussian(Complex64::new(a, 0.0)), poly);
        let mus = [mu, 0.5 * mu];
        let field = apply_z_reduced(&mus, 0, bar, &f);
        // d/dz = (d/dx - i d/dy) / 2, d/dzbar = (d/dx + i d/dy) / 2
        let h = 1e-5;
        let shift = |dz: Complex64| {
            let mut w = z.clone();
            w[0] += dz;
            f.eval(&w)
        };
        let dx = (shift(Complex64::new(h, 0.0)) - shift(Complex64::new(-h, 0.0))) / (2.0 * h);
        let dy = (shift(Complex64::new(0.0, h)) - shift(Complex64::new(0.0, -h))) / (2.0 * h);
        let i = Complex64::i();
        let expected = if bar {
            (dx + i * dy) / 2.0 + mu / 4.0 * z[0] * f.eval(&z)
        } else {
            (dx - i * dy) / 2.0 - mu / 4.0 * z[0].conj() * f.eval(&z)
        };
        prop_assert!((field.eval(&z) - expected).norm() <= 1e-7);
    }

    #[test]
    fn type_function_json_roundtrip(a in -1.0f64..0.0, k in -2i32..3, z in cvec(2)) {
        prop_assume!(z.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-3);
        let f = TypeFunction::new(
            RadialSum::term(Complex64::new(0.7, 0.1), Complex64::new(a, 0.0), k),
            BiPolynomial::z(2, 1),
        );
        let back = TypeFunction::from_json_value(2, &f.to_json_value()).unwrap();
        prop_assert!((back.eval(&z) - f.eval(&z)).norm() <= 1e-14 * f.eval(&z).norm().max(1.0));
    }
}
