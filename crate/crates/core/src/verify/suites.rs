use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde_json::{json, Value};

use super::{Case, Expectation, SuiteConfig, SuiteName};
use crate::coords::norm;
use crate::error::{Result, TsmError};
use crate::group::{
    anticommutation_residual, group_law, orthogonality_residual, sample_directions, skew_residual,
    twist_coefficients, validate, GroupPoint, GroupSpec, MetivierStatus, StepTwoGroup, SPECTRAL_TOL,
    STRUCTURAL_TOL,
};
use crate::harmonics::{corollary_split, harmonic_decompose_pq, harmonic_projections_of_monomials, Side};
use crate::mean::{
    boundary_ode_probe_fn, frame_equivalence_check, hecke_bochner_check, tsm, vanishing_kernel, ConvolutionRule,
    Evaluable,
};
use crate::poly::{monomials_of_bidegree, BiPolynomial};
use crate::quadrature::QuadratureRule;
use crate::radial::{
    annihilation_check, build_stack, chain_schedule, coupled_kernel_family, default_schedule, solution_family,
    RadialSum, TypeFunction,
};
use crate::reduce::reduce_group;

type Outcome = Result<(f64, Value)>;

pub(super) fn build(cfg: &SuiteConfig, spec: Option<&GroupSpec>, group: Option<&StepTwoGroup>) -> Result<Vec<Case>> {
    let need = || group.cloned().ok_or_else(|| TsmError::Invalid("suite needs a group".into()));
    match cfg.suite {
        SuiteName::Structure => structure(cfg, spec.expect("structure suite resolves a group"), need()?),
        SuiteName::Reduce => reduce(cfg, need()?),
        SuiteName::Harmonics => harmonics(cfg),
        SuiteName::Ode => ode(cfg, group),
        SuiteName::Lemma32 => lemma32(cfg, need()?),
        SuiteName::Th42 => th42(cfg, need()?),
        SuiteName::Hecke => hecke(cfg),
        SuiteName::Boundary => boundary(cfg, need()?),
    }
}

fn case<F>(key: String, expect: Expectation, inputs: Value, tolerance: f64, run: F) -> Case
where
    F: Fn() -> Outcome + Send + Sync + 'static,
{
    Case {
        key,
        expect,
        inputs,
        tolerance,
        run: Box::new(run),
    }
}

/// Independent stream per case so inputs do not depend on scheduling.
fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

fn cj(c: Complex64) -> Value {
    json!([c.re, c.im])
}

fn zj(z: &[Complex64]) -> Value {
    Value::Array(z.iter().map(|c| cj(*c)).collect())
}

fn random_point(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<Complex64> {
    let v: Vec<f64> = (0..2 * n).map(|_| StandardNormal.sample(rng)).collect();
    let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-300);
    (0..n)
        .map(|l| Complex64::new(v[l], v[n + l]) * (radius / len))
        .collect()
}

fn default_lambdas(cfg: &SuiteConfig, m: usize) -> Vec<Vec<f64>> {
    if cfg.lambdas.is_empty() {
        let mut e = vec![0.0; m];
        e[0] = 1.0;
        vec![e]
    } else {
        cfg.lambdas.clone()
    }
}

fn check_lambda_len(lambdas: &[Vec<f64>], m: usize) -> Result<()> {
    match lambdas.iter().find(|l| l.len() != m) {
        Some(l) => Err(TsmError::Dimension(format!(
            "lambda {l:?} has length {}, group has m = {m}",
            l.len()
        ))),
        None => Ok(()),
    }
}

fn structure(cfg: &SuiteConfig, spec: &GroupSpec, group: StepTwoGroup) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let count = cfg.cases.unwrap_or(100);
    let (n, m) = (group.n(), group.m());
    let report = validate(&group, spec.mode);
    let mut cases = Vec::new();
    for c in report.conditions {
        let tolerance = if c.tolerance > 0.0 { tol } else { c.tolerance };
        let inputs = json!({ "mode": spec.mode });
        cases.push(case(format!("condition/{}", c.name), Expectation::Pass, inputs, tolerance, move || {
            Ok((c.residual, json!({ "detail": c.detail })))
        }));
    }
    if let Some(mv) = report.metivier {
        cases.push(case("metivier".into(), Expectation::Pass, json!({ "samples": mv.samples }), 0.0, move || {
            let residual = match mv.status {
                MetivierStatus::HeuristicFail => SPECTRAL_TOL - mv.min_abs_det,
                _ => 0.0,
            };
            Ok((residual, json!({ "status": mv.status, "min_abs_det": mv.min_abs_det })))
        }));
    }
    for i in 0..count {
        let mut rng = stream(cfg.seed, i as u64);
        let point = |rng: &mut ChaCha8Rng| GroupPoint {
            x: (0..2 * n).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            t: (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        };
        let (a, b, c) = (point(&mut rng), point(&mut rng), point(&mut rng));
        let g = group.clone();
        let inputs = json!({ "a": [a.x, a.t], "b": [b.x, b.t], "c": [c.x, c.t] });
        cases.push(case(format!("group_law/{i:04}"), Expectation::Pass, inputs, tol, move || {
            let left = group_law(&g, &group_law(&g, &a, &b)?, &c)?;
            let right = group_law(&g, &a, &group_law(&g, &b, &c)?)?;
            let e = group_law(&g, &a, &a.inverse())?;
            let assoc = left.t.iter().zip(&right.t).chain(left.x.iter().zip(&right.x));
            let assoc = assoc.map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
            let inv = e.x.iter().chain(&e.t).map(|v| v.abs()).fold(0.0, f64::max);
            let scale = left.t.iter().map(|v| v.abs()).fold(1.0, f64::max);
            Ok((assoc.max(inv) / scale, json!({ "associativity": assoc, "inverse": inv })))
        }));
    }
    // eta_jj = 0 for arbitrary skew structure matrices of this shape
    for i in 0..count {
        let mut rng = stream(cfg.seed ^ 0x7477_6973_7400, i as u64);
        let mats: Vec<Vec<f64>> = (0..m)
            .map(|_| {
                let d = 2 * n;
                let mut u = vec![0.0; d * d];
                for r in 0..d {
                    for c in r + 1..d {
                        let v: f64 = rng.gen_range(-1.0..1.0);
                        u[r * d + c] = v;
                        u[c * d + r] = -v;
                    }
                }
                u
            })
            .collect();
        let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let inputs = json!({ "U": mats, "lambda": lambda });
        cases.push(case(format!("twist_diag/{i:04}"), Expectation::Pass, inputs, tol, move || {
            let g = StepTwoGroup::from_row_major(n, m, &mats)?;
            let table = twist_coefficients(&g, &lambda)?;
            let r = table.max_eta_diag();
            Ok((r, json!({ "max_abs_eta_diag": r })))
        }));
    }
    if cfg.negative_controls {
        let mut mats = group.to_row_major();
        mats[0][1] += 1e-3;
        cases.push(case(
            "control/non_skew".into(),
            Expectation::Fail,
            json!({ "perturbed_entry": [0, 0, 1], "delta": 1e-3 }),
            tol,
            move || {
                let g = StepTwoGroup::from_row_major(n, m, &mats)?;
                let r = skew_residual(&g);
                Ok((r, json!({ "skew_residual": r })))
            },
        ));
    }
    Ok(cases)
}

fn is_htype(group: &StepTwoGroup) -> bool {
    skew_residual(group) <= STRUCTURAL_TOL
        && orthogonality_residual(group) <= STRUCTURAL_TOL
        && anticommutation_residual(group) <= STRUCTURAL_TOL
}

fn reduce(cfg: &SuiteConfig, group: StepTwoGroup) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let m = group.m();
    let lambdas: Vec<Vec<f64>> = if cfg.lambdas.is_empty() {
        let mut rng = stream(cfg.seed, u64::MAX);
        sample_directions(m, cfg.cases.unwrap_or(100), cfg.seed)
            .into_iter()
            .map(|d| {
                let s: f64 = rng.gen_range(0.5..3.0);
                d.into_iter().map(|x| x * s).collect()
            })
            .collect()
    } else {
        cfg.lambdas.clone()
    };
    check_lambda_len(&lambdas, m)?;
    let htype = is_htype(&group);
    let mut cases = Vec::new();
    for (i, lambda) in lambdas.iter().cloned().enumerate() {
        let g = group.clone();
        let inputs = json!({ "lambda": lambda });
        cases.push(case(format!("frame/{i:04}"), Expectation::Pass, inputs, tol, move || {
            let frame = reduce_group(&g, &lambda)?;
            let lnorm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
            let orth = frame.orthogonality_residual();
            let conj = frame.conjugation_residual();
            let cong = frame.congruence_residual();
            let mu_dev = if htype {
                frame.mu.iter().map(|mu| (mu - lnorm).abs()).fold(0.0, f64::max)
            } else {
                0.0
            };
            let residual = orth.max(conj).max(cong).max(mu_dev);
            Ok((
                residual,
                json!({
                    "mu": frame.mu,
                    "orthogonality": orth,
                    "conjugation": conj,
                    "congruence": cong,
                    "htype_mu_deviation": if htype { Some(mu_dev) } else { None },
                }),
            ))
        }));
    }
    if cfg.negative_controls {
        let g = group.clone();
        let lambda = lambdas[0].clone();
        let inputs = json!({ "lambda": lambda, "frame_lambda": lambda.iter().map(|x| -x).collect::<Vec<_>>() });
        cases.push(case("control/wrong_frame".into(), Expectation::Fail, inputs, tol, move || {
            // frame of -lambda checked against V_lambda
            let neg: Vec<f64> = lambda.iter().map(|x| -x).collect();
            let frame = reduce_group(&g, &neg)?;
            let v = g.combination(&lambda)?;
            let r = (&v * &frame.a - &frame.a * &frame.ucanon).amax();
            Ok((r, json!({ "conjugation": r })))
        }));
    }
    Ok(cases)
}

fn harmonics(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let ns = cfg.params.n.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let degree = cfg.params.degree.unwrap_or(5);
    let mut cases = Vec::new();
    for &n in &ns {
        if n == 0 {
            return Err(TsmError::Dimension("n must be positive".into()));
        }
        for total in 0..=degree {
            for p in 0..=total {
                let q = total - p;
                for (idx, mono) in monomials_of_bidegree(n, p, q).into_iter().enumerate() {
                    let inputs = json!({ "n": n, "alpha": mono.alpha(), "beta": mono.beta() });
                    let poly = BiPolynomial::from_terms(n, [(mono, Complex64::new(1.0, 0.0))]);
                    cases.push(case(
                        format!("layers/n{n}/p{p}q{q}/{idx:04}"),
                        Expectation::Pass,
                        inputs,
                        tol,
                        move || {
                            let dec = harmonic_decompose_pq(&poly, p, q)?;
                            let recon = (&dec.reconstruct() - &poly).max_abs_coeff();
                            let lap = dec.max_laplacian();
                            Ok((recon.max(lap), json!({ "layers": dec.layers.len(), "reconstruction": recon, "max_laplacian": lap })))
                        },
                    ));
                }
            }
        }
        // the split of zbar_j P and z_j P, with gamma fitted independently
        for total in 0..degree {
            for p in 0..=total {
                let q = total - p;
                let basis = harmonic_projections_of_monomials(n, p, q)?;
                for (idx, h) in basis.into_iter().enumerate() {
                    if h.is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        for side in [Side::Zbar, Side::Z] {
                            let tag = if side == Side::Zbar { "zbar" } else { "z" };
                            let inputs = json!({ "n": n, "p": p, "q": q, "j": j, "side": tag, "poly": h.to_json_value() });
                            let h = h.clone();
                            cases.push(case(
                                format!("split/n{n}/p{p}q{q}/{idx:04}/j{j}/{tag}"),
                                Expectation::Pass,
                                inputs,
                                tol,
                                move || split_case(&h, j, side, n, p, q),
                            ));
                        }
                    }
                }
            }
        }
    }
    if cfg.negative_controls {
        let n = ns[0];
        let poly = &BiPolynomial::norm_sq(n) * &BiPolynomial::z(n, 0);
        let inputs = json!({ "n": n, "poly": poly.to_json_value() });
        cases.push(case("control/non_harmonic".into(), Expectation::Fail, inputs, tol, move || {
            let lap = poly.laplacian().max_abs_coeff();
            Ok((lap, json!({ "max_laplacian": lap })))
        }));
    }
    Ok(cases)
}

fn split_case(h: &BiPolynomial, j: usize, side: Side, n: usize, p: u32, q: u32) -> Outcome {
    let split = corollary_split(h, j, side)?;
    let (shifted, deriv) = match side {
        Side::Zbar => (h.mul_zbar(j), h.d_z(j)),
        Side::Z => (h.mul_z(j), h.d_zbar(j)),
    };
    let scale = shifted.max_abs_coeff().max(1.0);
    let lifted = deriv.mul_norm_sq_pow(1);
    let gamma = split.gamma();
    let recon = match gamma {
        Some(g) => &split.p0 + &lifted.scale_real(g),
        None => split.p0.clone(),
    };
    let recon_err = (&recon - &shifted).max_abs_coeff() / scale;
    let lap = split.p0.laplacian().max_abs_coeff() / scale;
    // least-squares c with Delta(shifted - c lifted) = 0
    let fitted = if deriv.is_zero() {
        None
    } else {
        let a = shifted.laplacian();
        let b = lifted.laplacian();
        let num: Complex64 = b.terms().map(|(mono, cb)| cb.conj() * a.coeff(mono.alpha(), mono.beta())).sum();
        let den: f64 = b.terms().map(|(_, cb)| cb.norm_sqr()).sum();
        Some(num / den)
    };
    let formula = 1.0 / (n as f64 + p as f64 + q as f64 - 1.0);
    let gamma_err = match (fitted, gamma) {
        (Some(c), Some(g)) => (c - g).norm().max((g - formula).abs()),
        (Some(_), None) => f64::INFINITY,
        _ => 0.0,
    };
    Ok((
        recon_err.max(lap).max(gamma_err),
        json!({
            "gamma": gamma,
            "gamma_fitted": fitted.map(cj),
            "reconstruction": recon_err,
            "p0_laplacian": lap,
        }),
    ))
}

fn ode(cfg: &SuiteConfig, group: Option<&StepTwoGroup>) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let ns = cfg.params.n.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let ps = cfg.params.p.clone().unwrap_or_else(|| vec![1, 2, 3]);
    let qs = cfg.params.q.clone().unwrap_or_else(|| vec![1, 2, 3]);
    // reduced fields have nu_jj = -mu_j
    let nu = match (cfg.params.nu, group) {
        (Some([re, im]), _) => Complex64::new(re, im),
        (None, Some(g)) => {
            let lambda = default_lambdas(cfg, g.m()).swap_remove(0);
            Complex64::new(-reduce_group(g, &lambda)?.mu[0], 0.0)
        }
        (None, None) => Complex64::new(-1.0, 0.0),
    };
    let mut cases = Vec::new();
    for &n in &ns {
        for &p in &ps {
            for &q in &qs {
                let (p, q) = (p as usize, q as usize);
                let a: Vec<Complex64> = (0..p).map(|i| Complex64::new(1.0 + 0.5 * i as f64, 0.0)).collect();
                let b: Vec<Complex64> = (0..q).map(|k| Complex64::new(1.0, -0.5 * k as f64)).collect();
                let inputs = json!({ "n": n, "p": p, "q": q, "nu": cj(nu), "A": zj(&a), "B": zj(&b) });
                let tag = format!("n{n}/p{p}q{q}");
                {
                    let (a, b) = (a.clone(), b.clone());
                    cases.push(case(format!("family/{tag}"), Expectation::Pass, inputs.clone(), tol, move || {
                        let fam = solution_family(p, q, n, nu, nu, &a, &b)?;
                        let stack = build_stack(p, q, n, None, nu, nu)?;
                        annihilation(&stack, &fam, default_schedule(p, q, n))
                    }));
                }
                {
                    let a = a.clone();
                    let zeros = vec![Complex64::default(); q];
                    cases.push(case(format!("family_a_terms/{tag}"), Expectation::Pass, inputs.clone(), tol, move || {
                        let fam = solution_family(p, q, n, nu, nu, &a, &zeros)?;
                        let stack = build_stack(p, q, n, None, nu, nu)?;
                        annihilation(&stack, &fam, default_schedule(p, q, n))
                    }));
                }
                cases.push(case(format!("coupled/{tag}"), Expectation::Pass, inputs, tol, move || {
                    let fam = coupled_kernel_family(p, q, n, nu, nu, &a, &b)?;
                    let schedule = chain_schedule(p, q, n);
                    let stack = build_stack(p, q, n, Some(&schedule), nu, nu)?;
                    annihilation(&stack, &fam, schedule)
                }));
            }
        }
    }
    if cfg.negative_controls {
        let (n, p, q) = (ns[0], ps[0] as usize, qs[0] as usize);
        let a: Vec<Complex64> = vec![Complex64::new(1.0, 0.0); p];
        let zeros = vec![Complex64::default(); q];
        let inputs = json!({ "n": n, "p": p, "q": q, "nu": cj(nu), "family_nu": cj(-nu) });
        cases.push(case("control/sign_flipped".into(), Expectation::Fail, inputs, tol, move || {
            let fam = solution_family(p, q, n, -nu, -nu, &a, &zeros)?;
            let stack = build_stack(p, q, n, None, nu, nu)?;
            annihilation(&stack, &fam, default_schedule(p, q, n))
        }));
    }
    Ok(cases)
}

/// Residual relative to the family's largest coefficient.
fn annihilation(stack: &crate::radial::OperatorStack, fam: &RadialSum, schedule: Vec<f64>) -> Outcome {
    let scale = fam.max_abs_coeff().max(1.0);
    let rep = annihilation_check(stack, &fam.scale(Complex64::new(1.0 / scale, 0.0)));
    Ok((
        rep.residual,
        json!({ "surviving_terms": rep.surviving_terms, "kappa": schedule, "family_scale": scale }),
    ))
}

fn random_test_function(rng: &mut ChaCha8Rng, n: usize) -> TypeFunction {
    let rate: f64 = rng.gen_range(0.3..1.0);
    let mut poly = BiPolynomial::constant(n, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    for total in 1..=2u32 {
        for p in 0..=total {
            for mono in monomials_of_bidegree(n, p, total - p) {
                if rng.gen_bool(0.5) {
                    poly.add_term(mono, Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
                }
            }
        }
    }
    TypeFunction::new(RadialSum::gaussian(Complex64::new(-rate, 0.0)), poly)
}

fn type_json(f: &TypeFunction) -> Value {
    f.to_json_value()
}

fn lemma32(cfg: &SuiteConfig, group: StepTwoGroup) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let rule = QuadratureRule::parse(cfg.quad_spec(), cfg.seed)?;
    let (n, m) = (group.n(), group.m());
    check_lambda_len(&cfg.lambdas, m)?;
    let count = cfg.cases.unwrap_or(200);
    let mut cases = Vec::new();
    for i in 0..count {
        let mut rng = stream(cfg.seed, i as u64);
        let lambda: Vec<f64> = if cfg.lambdas.is_empty() {
            let dir = random_point(&mut rng, m, 1.0);
            let s: f64 = rng.gen_range(0.5..2.0);
            // first m real coordinates of a uniform direction in C^m
            let v: Vec<f64> = dir.iter().map(|c| c.re).collect();
            let len = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-3);
            v.iter().map(|x| x * s / len).collect()
        } else {
            cfg.lambdas[i % cfg.lambdas.len()].clone()
        };
        let f = random_test_function(&mut rng, n);
        let radius: f64 = rng.gen_range(0.0..1.0);
        let z = random_point(&mut rng, n, radius);
        let s: f64 = rng.gen_range(0.2..1.5);
        let inputs = json!({ "lambda": lambda, "f": type_json(&f), "z": zj(&z), "s": s });
        let g = group.clone();
        cases.push(case(format!("case/{i:04}"), Expectation::Pass, inputs, tol, move || {
            let frame = reduce_group(&g, &lambda)?;
            let chk = frame_equivalence_check(&g, &frame, &f.clone().into(), &z, s, &rule)?;
            Ok((
                chk.residual,
                json!({ "lhs": cj(chk.lhs), "rhs": cj(chk.rhs), "err_estimate": chk.err_estimate, "mu": frame.mu }),
            ))
        }));
    }
    if cfg.negative_controls {
        let mut rng = stream(cfg.seed, u64::MAX - 1);
        let lambda = default_lambdas(cfg, m).swap_remove(0);
        let f = random_test_function(&mut rng, n);
        let flipped = TypeFunction::new(
            RadialSum::gaussian(-f.summands[0].0.terms()[0].a),
            f.summands[0].1.clone(),
        );
        let z = random_point(&mut rng, n, 0.5);
        let s = 0.8;
        let inputs = json!({ "lambda": lambda, "f": type_json(&f), "rhs_f": type_json(&flipped), "z": zj(&z), "s": s });
        let g = group.clone();
        cases.push(case("control/gaussian_sign".into(), Expectation::Fail, inputs, tol, move || {
            let frame = reduce_group(&g, &lambda)?;
            let lhs = frame_equivalence_check(&g, &frame, &f.clone().into(), &z, s, &rule)?.lhs;
            let rhs = frame_equivalence_check(&g, &frame, &flipped.clone().into(), &z, s, &rule)?.rhs;
            Ok(((lhs - rhs).norm(), json!({ "lhs": cj(lhs), "rhs": cj(rhs) })))
        }));
    }
    Ok(cases)
}

/// `z_1^p zbar_n^q`, harmonic unless `n = 1` and `p, q > 0`.
fn reduced_monomial(n: usize, p: u32, q: u32) -> BiPolynomial {
    let mut alpha = vec![0; n];
    let mut beta = vec![0; n];
    alpha[0] = p;
    beta[n - 1] += q;
    BiPolynomial::monomial(n, alpha, beta, Complex64::new(1.0, 0.0))
}

#[allow(clippy::too_many_arguments)]
fn th42_mean(
    g: &StepTwoGroup,
    lambda: &[f64],
    poly: &BiPolynomial,
    index: i64,
    sign: f64,
    z: &[Complex64],
    s: f64,
    rule: &QuadratureRule,
) -> Outcome {
    if index < 0 {
        return Err(TsmError::Invalid(format!("exponent index {index} is negative")));
    }
    let frame = reduce_group(g, lambda)?;
    let lnorm = lambda.iter().map(|x| x * x).sum::<f64>().sqrt();
    let h: Evaluable = vanishing_kernel(&frame, sign * lnorm, poly, index as usize)?.into();
    let est = tsm(g, lambda, &h, z, s, rule)?;
    Ok((
        est.value.norm(),
        json!({ "mean": cj(est.value), "err_estimate": est.err_estimate }),
    ))
}

fn th42(cfg: &SuiteConfig, group: StepTwoGroup) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let rule = QuadratureRule::parse(cfg.quad_spec(), cfg.seed)?;
    let (n, m) = (group.n(), group.m());
    let lambdas = default_lambdas(cfg, m);
    check_lambda_len(&lambdas, m)?;
    let ps = cfg.params.p.clone().unwrap_or_else(|| vec![1, 2]);
    let qs = cfg
        .params
        .q
        .clone()
        .unwrap_or_else(|| if n == 1 { vec![0] } else { vec![0, 1] });
    let grid = &cfg.grid;
    // (z, s) pairs with s > |z| + r
    let mut rng = stream(cfg.seed, 0);
    let mut points = Vec::new();
    for k in 0..grid.z_samples {
        let radius = 0.8 * (k as f64 + 0.5) / grid.z_samples as f64;
        let z = random_point(&mut rng, n, radius);
        for j in 0..grid.s_samples {
            let s = norm(&z) + grid.r + 0.15 + 0.35 * j as f64;
            points.push((k, j, z.clone(), s));
        }
    }
    let pert = cfg.perturb.clone();
    let mut cases = Vec::new();
    for (li, lambda) in lambdas.iter().enumerate() {
        for &p in &ps {
            for &q in &qs {
                if p == 0 || (n == 1 && q > 0) {
                    continue;
                }
                let poly = reduced_monomial(n, p, q);
                for i in 1..=p {
                    let index = i as i64 + pert.exponent_offset as i64;
                    for (k, j, z, s) in &points {
                        let inputs = json!({
                            "lambda": lambda, "p": p, "q": q, "i": i, "z": zj(z), "z_norm": norm(z), "s": s, "r": grid.r,
                            "exponent_index": index, "gaussian_sign": pert.gaussian_sign,
                        });
                        let (g, lambda, poly, z, s, sign) = (group.clone(), lambda.clone(), poly.clone(), z.clone(), *s, pert.gaussian_sign);
                        cases.push(case(
                            format!("mean/l{li}/p{p}q{q}/i{i}/z{k}/s{j}"),
                            Expectation::Pass,
                            inputs,
                            tol,
                            move || th42_mean(&g, &lambda, &poly, index, sign, &z, s, &rule),
                        ));
                    }
                }
            }
        }
    }
    if cfg.negative_controls {
        let (_, _, z, s) = points[0].clone();
        let lambda = lambdas[0].clone();
        let poly = reduced_monomial(n, 1, 0);
        for (name, index, sign) in [("wrong_exponent", 2, 1.0), ("gaussian_sign", 1, -1.0)] {
            let inputs = json!({ "lambda": lambda, "p": 1, "q": 0, "exponent_index": index, "gaussian_sign": sign, "z": zj(&z), "s": s });
            let (g, lambda, poly, z) = (group.clone(), lambda.clone(), poly.clone(), z.clone());
            cases.push(case(format!("control/{name}"), Expectation::Fail, inputs, 1e-3, move || {
                th42_mean(&g, &lambda, &poly, index, sign, &z, s, &rule)
            }));
        }
    }
    Ok(cases)
}

fn hecke(cfg: &SuiteConfig) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let rule = ConvolutionRule::parse(cfg.quad_spec(), cfg.seed)?;
    let ns = cfg.params.n.clone().unwrap_or_else(|| vec![1]);
    let ps = cfg.params.p.clone().unwrap_or_else(|| vec![0, 1]);
    let qs = cfg.params.q.clone().unwrap_or_else(|| vec![0, 1]);
    let ks = cfg.params.k.clone().unwrap_or_else(|| vec![0, 1, 2]);
    let lambdas: Vec<f64> = if cfg.lambdas.is_empty() {
        vec![1.0, -1.0]
    } else {
        cfg.lambdas.iter().map(|l| l[0]).collect()
    };
    let g = RadialSum::gaussian(Complex64::new(-0.5, 0.0));
    let mut cases = Vec::new();
    let mut id = 0u64;
    for &n in &ns {
        for &p in &ps {
            for &q in &qs {
                if n == 1 && p > 0 && q > 0 {
                    continue;
                }
                let poly = reduced_monomial(n, p, q);
                for (li, &lambda) in lambdas.iter().enumerate() {
                    for &k in &ks {
                        id += 1;
                        let mut rng = stream(cfg.seed, id);
                        let radius: f64 = rng.gen_range(0.2..1.0);
                        let z = random_point(&mut rng, n, radius);
                        let inputs = json!({
                            "n": n, "p": p, "q": q, "k": k, "lambda": lambda, "z": zj(&z),
                            "g": g.to_json_value(), "poly": poly.to_json_value(),
                        });
                        let (gg, poly) = (g.clone(), poly.clone());
                        cases.push(case(
                            format!("identity/n{n}/p{p}q{q}/l{li}/k{k}"),
                            Expectation::Pass,
                            inputs,
                            tol,
                            move || {
                                let r = hecke_bochner_check(n, p, q, k, lambda, &gg, &poly, &z, &rule)?;
                                Ok((
                                    r.relative,
                                    json!({
                                        "lhs": cj(r.lhs), "rhs": cj(r.rhs), "residual": r.residual,
                                        "vanishing_branch": r.vanishing_branch, "err_estimate": r.err_estimate,
                                    }),
                                ))
                            },
                        ));
                    }
                }
            }
        }
    }
    if cfg.negative_controls {
        let (n, p, q, lambda) = (ns[0], ps[0], qs[0], lambdas[0]);
        let shift = if lambda > 0.0 { p } else { q } as usize;
        let k = shift;
        let poly = reduced_monomial(n, p, q);
        let mut rng = stream(cfg.seed, 0);
        let z = random_point(&mut rng, n, 0.5);
        let inputs = json!({ "n": n, "p": p, "q": q, "k": k, "rhs_k": k + 1, "lambda": lambda, "z": zj(&z) });
        cases.push(case("control/wrong_laguerre_index".into(), Expectation::Fail, inputs, tol, move || {
            let lhs = hecke_bochner_check(n, p, q, k, lambda, &g, &poly, &z, &rule)?.lhs;
            let rhs = hecke_bochner_check(n, p, q, k + 1, lambda, &g, &poly, &z, &rule)?.rhs;
            let residual = (lhs - rhs).norm() / rhs.norm().max(f64::MIN_POSITIVE);
            Ok((residual, json!({ "lhs": cj(lhs), "rhs": cj(rhs) })))
        }));
    }
    Ok(cases)
}

fn boundary(cfg: &SuiteConfig, group: StepTwoGroup) -> Result<Vec<Case>> {
    let tol = cfg.tolerance();
    let lambdas = default_lambdas(cfg, group.m());
    check_lambda_len(&lambdas, group.m())?;
    let grid = &cfg.grid;
    let r_grid: Vec<f64> = (0..grid.r_points)
        .map(|i| grid.r_min + (grid.r_max - grid.r_min) * i as f64 / (grid.r_points - 1) as f64)
        .collect();
    let panel = cfg.params.panel_order.unwrap_or(8);
    let sign = cfg.perturb.gaussian_sign;
    let mut mus = Vec::new();
    for lambda in &lambdas {
        mus.push(reduce_group(&group, lambda)?.mu[0]);
    }
    let mut cases = Vec::new();
    let probe = move |mu: f64, f: Box<dyn Fn(f64) -> Complex64 + Send + Sync>, grid: Vec<f64>| -> Outcome {
        let rep = boundary_ode_probe_fn(mu, |r| Ok(f(r)), &grid, panel)?;
        Ok((rep.max_residual, json!({ "c_estimate": cj(rep.c_estimate), "points": grid.len() })))
    };
    for (li, &mu) in mus.iter().enumerate() {
        let base = json!({ "mu1": mu, "r_min": grid.r_min, "r_max": grid.r_max, "r_points": grid.r_points, "panel_order": panel });
        {
            let rg = r_grid.clone();
            let mut inputs = base.clone();
            inputs["F"] = json!("r^-1 exp(mu r^2 / 4)");
            cases.push(case(format!("stated_form/l{li}"), Expectation::Pass, inputs, tol, move || {
                probe(mu, Box::new(move |r| Complex64::new((sign * mu * r * r / 4.0).exp() / r, 0.0)), rg.clone())
            }));
        }
        for (ci, c) in [Complex64::new(1.0, 0.0), Complex64::new(0.5, -0.2)].into_iter().enumerate() {
            let rg = r_grid.clone();
            let mut inputs = base.clone();
            inputs["F"] = json!("c r exp(mu r^2 / 4)");
            inputs["c"] = cj(c);
            cases.push(case(format!("solution/l{li}/c{ci}"), Expectation::Pass, inputs, tol, move || {
                probe(mu, Box::new(move |r| c * r * (sign * mu * r * r / 4.0).exp()), rg.clone())
            }));
        }
    }
    if cfg.negative_controls {
        let mu = mus[0];
        let rg = r_grid.clone();
        let inputs = json!({ "mu1": mu, "F": "r exp(-mu r^2 / 4)" });
        cases.push(case("control/gaussian_sign".into(), Expectation::Fail, inputs, tol, move || {
            probe(mu, Box::new(move |r| Complex64::new(r * (-mu * r * r / 4.0).exp(), 0.0)), rg.clone())
        }));
    }
    Ok(cases)
}
