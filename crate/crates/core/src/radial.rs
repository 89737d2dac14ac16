//! Gaussian-power sums `sum c e^{a rho^2} rho^k`, type functions
//! `a~(rho) P(z)`, and the radial operators acting on them.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsmError};
use crate::group::{twist_coefficients, StepTwoGroup, TwistTable};
use crate::poly::{BiPolynomial, Monomial, PRUNE_TOL};
use crate::reduce::reduce_group;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialTerm {
    pub c: Complex64,
    pub a: Complex64,
    pub k: i32,
}

impl RadialTerm {
    pub fn eval(&self, rho: f64) -> Complex64 {
        self.c * (self.a * rho * rho).exp() * rho.powi(self.k)
    }
}

/// Terms are merged on exactly equal `(a, k)`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RadialSum {
    terms: Vec<RadialTerm>,
}

#[derive(Serialize, Deserialize)]
struct RadialRecord {
    re_c: f64,
    im_c: f64,
    re_a: f64,
    im_a: f64,
    k: i32,
}

fn cmp_term(x: &RadialTerm, y: &RadialTerm) -> std::cmp::Ordering {
    x.a.re
        .total_cmp(&y.a.re)
        .then(x.a.im.total_cmp(&y.a.im))
        .then(x.k.cmp(&y.k))
}

impl RadialSum {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: Complex64) -> Self {
        Self::term(c, Complex64::default(), 0)
    }

    pub fn one() -> Self {
        Self::constant(Complex64::new(1.0, 0.0))
    }

    pub fn term(c: Complex64, a: Complex64, k: i32) -> Self {
        Self::from_terms(vec![RadialTerm { c, a, k }])
    }

    /// `e^{a rho^2}`.
    pub fn gaussian(a: Complex64) -> Self {
        Self::term(Complex64::new(1.0, 0.0), a, 0)
    }

    pub fn power(k: i32) -> Self {
        Self::term(Complex64::new(1.0, 0.0), Complex64::default(), k)
    }

    pub fn from_terms(terms: Vec<RadialTerm>) -> Self {
        let mut terms = terms;
        terms.sort_by(cmp_term);
        let mut merged: Vec<RadialTerm> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.a == t.a && last.k == t.k => last.c += t.c,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.c.norm() > PRUNE_TOL);
        Self { terms: merged }
    }

    pub fn terms(&self) -> &[RadialTerm] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().fold(0.0, |acc, t| acc.max(t.c.norm()))
    }

    /// Smallest power present; `None` for the zero sum.
    pub fn min_power(&self) -> Option<i32> {
        self.terms.iter().map(|t| t.k).min()
    }

    pub fn eval(&self, rho: f64) -> Complex64 {
        self.terms.iter().map(|t| t.eval(rho)).sum()
    }

    pub fn add(&self, other: &RadialSum) -> RadialSum {
        let mut t = self.terms.clone();
        t.extend_from_slice(&other.terms);
        Self::from_terms(t)
    }

    pub fn sub(&self, other: &RadialSum) -> RadialSum {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> RadialSum {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| RadialTerm { c: t.c * s, ..*t })
                .collect(),
        )
    }

    pub fn mul(&self, other: &RadialSum) -> RadialSum {
        let mut out = Vec::with_capacity(self.terms.len() * other.terms.len());
        for x in &self.terms {
            for y in &other.terms {
                out.push(RadialTerm {
                    c: x.c * y.c,
                    a: x.a + y.a,
                    k: x.k + y.k,
                });
            }
        }
        Self::from_terms(out)
    }

    pub fn mul_power(&self, k: i32) -> RadialSum {
        Self::from_terms(
            self.terms
                .iter()
                .map(|t| RadialTerm { k: t.k + k, ..*t })
                .collect(),
        )
    }

    /// `rho d/drho`: `(c, a, k) -> c k rho^k + 2 a c rho^{k+2}`.
    pub fn rho_d_rho(&self) -> RadialSum {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            out.push(RadialTerm {
                c: t.c * t.k as f64,
                ..*t
            });
            out.push(RadialTerm {
                c: 2.0 * t.a * t.c,
                a: t.a,
                k: t.k + 2,
            });
        }
        Self::from_terms(out)
    }

    /// `(1 / 2 rho) d/drho`, the radial factor of `d/dz_j` (times `zbar_j`).
    pub fn half_inv_rho_d_rho(&self) -> RadialSum {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for t in &self.terms {
            out.push(RadialTerm {
                c: t.c * (0.5 * t.k as f64),
                a: t.a,
                k: t.k - 2,
            });
            out.push(RadialTerm {
                c: t.c * t.a,
                ..*t
            });
        }
        Self::from_terms(out)
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let records: Vec<RadialRecord> = self
            .terms
            .iter()
            .map(|t| RadialRecord {
                re_c: t.c.re,
                im_c: t.c.im,
                re_a: t.a.re,
                im_a: t.a.im,
                k: t.k,
            })
            .collect();
        serde_json::to_value(records).expect("radial records serialize")
    }

    pub fn from_json_value(value: &serde_json::Value) -> Result<Self> {
        let records: Vec<RadialRecord> = serde_json::from_value(value.clone())?;
        Ok(Self::from_terms(
            records
                .into_iter()
                .map(|r| RadialTerm {
                    c: Complex64::new(r.re_c, r.im_c),
                    a: Complex64::new(r.re_a, r.im_a),
                    k: r.k,
                })
                .collect(),
        ))
    }
}

/// `D = rho d/drho + (nu/2) rho^2`, or with `bar`,
/// `Dbar = rho d/drho - (conj(nu)/2) rho^2`.
pub fn apply_d(bar: bool, nu: Complex64, a: &RadialSum) -> RadialSum {
    let shift = if bar { -nu.conj() / 2.0 } else { nu / 2.0 };
    a.rho_d_rho().add(&a.mul_power(2).scale(shift))
}

/// `gamma_{p,q} = 1/(n+p+q-1)`; `None` when the denominator vanishes
/// (`n = 1`, `p = q = 0`).
pub fn gamma(n: usize, p: usize, q: usize) -> Option<f64> {
    let den = n + p + q;
    (den > 1).then(|| 1.0 / (den - 1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Atom {
    /// `kappa D + 2`.
    D { kappa: f64, nu: Complex64 },
    /// `kappa Dbar + 2`.
    DBar { kappa: f64, nu: Complex64 },
    /// `weight * rho^{2l}`.
    RhoPow { l: i32, weight: Complex64 },
}

impl Atom {
    pub fn apply(&self, a: &RadialSum) -> RadialSum {
        match self {
            Atom::D { kappa, nu } => apply_d(false, *nu, a)
                .scale(Complex64::new(*kappa, 0.0))
                .add(&a.scale(Complex64::new(2.0, 0.0))),
            Atom::DBar { kappa, nu } => apply_d(true, *nu, a)
                .scale(Complex64::new(*kappa, 0.0))
                .add(&a.scale(Complex64::new(2.0, 0.0))),
            Atom::RhoPow { l, weight } => a.mul_power(2 * l).scale(*weight),
        }
    }
}

/// Atoms in written order; application runs right to left.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct OperatorStack {
    pub atoms: Vec<Atom>,
}

impl OperatorStack {
    pub fn apply(&self, a: &RadialSum) -> RadialSum {
        self.atoms.iter().rev().fold(a.clone(), |acc, atom| atom.apply(&acc))
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

fn is_gamma_value(n: usize, kappa: f64) -> bool {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return false;
    }
    let inv = 1.0 / kappa;
    let r = inv.round();
    (inv - r).abs() <= 1e-9 * r.max(1.0) && r >= 1.0 && r + 1.0 >= n as f64
}

/// The default schedule, in written order:
/// `gamma_{p,q+k-1}` for `k = 1..q` (on `Dbar`), then `gamma_{p-i+1,q}` for
/// `i = 1..p` (on `D`).
pub fn default_schedule(p: usize, q: usize, n: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (1..=q).map(|k| gamma(n, p, q + k - 1).unwrap()).collect();
    s.extend((1..=p).map(|i| gamma(n, p - i + 1, q).unwrap()));
    s
}

/// The schedule whose kernel closes in Gaussian-power sums for mixed
/// `(p, q)`: `gamma_{0,q-k+1}` on the `Dbar` atoms, `gamma_{p-i+1,q}` on `D`.
pub fn chain_schedule(p: usize, q: usize, n: usize) -> Vec<f64> {
    let mut s: Vec<f64> = (1..=q).map(|k| gamma(n, 0, q - k + 1).unwrap()).collect();
    s.extend((1..=p).map(|i| gamma(n, p - i + 1, q).unwrap()));
    s
}

/// Stack for `P = z_{l1}^p zbar_{l2}^q`: `q` `Dbar` atoms (with `nu_l2`)
/// to the left of `p` `D` atoms (with `nu_l1`).
pub fn build_stack(
    p: usize,
    q: usize,
    n: usize,
    kappa_schedule: Option<&[f64]>,
    nu_l1: Complex64,
    nu_l2: Complex64,
) -> Result<OperatorStack> {
    if n == 0 {
        return Err(TsmError::Dimension("n must be positive".into()));
    }
    let schedule = match kappa_schedule {
        Some(s) => s.to_vec(),
        None => default_schedule(p, q, n),
    };
    if schedule.len() != p + q {
        return Err(TsmError::InvalidStack(format!(
            "schedule has {} entries, expected p+q = {}",
            schedule.len(),
            p + q
        )));
    }
    if let Some(bad) = schedule.iter().find(|&&k| !is_gamma_value(n, k)) {
        return Err(TsmError::InvalidStack(format!(
            "kappa {bad} is not of the form 1/(n+p'+q'-1)"
        )));
    }
    let mut atoms = Vec::with_capacity(p + q);
    for &kappa in &schedule[..q] {
        atoms.push(Atom::DBar { kappa, nu: nu_l2 });
    }
    for &kappa in &schedule[q..] {
        atoms.push(Atom::D { kappa, nu: nu_l1 });
    }
    Ok(OperatorStack { atoms })
}

/// `sum_i A_i e^{-nu_l1 rho^2/4} rho^{-2(p+q+n-i)}
///  + sum_k B_k e^{conj(nu_l2) rho^2/4} rho^{-2(p+q+n-k)}`.
pub fn solution_family(
    p: usize,
    q: usize,
    n: usize,
    nu_l1: Complex64,
    nu_l2: Complex64,
    a_coeffs: &[Complex64],
    b_coeffs: &[Complex64],
) -> Result<RadialSum> {
    if a_coeffs.len() != p || b_coeffs.len() != q {
        return Err(TsmError::Invalid(format!(
            "expected {p} A and {q} B coefficients, got {} and {}",
            a_coeffs.len(),
            b_coeffs.len()
        )));
    }
    let total = (p + q + n) as i32;
    let mut terms = Vec::with_capacity(p + q);
    for (i, c) in a_coeffs.iter().enumerate() {
        terms.push(RadialTerm {
            c: *c,
            a: -nu_l1 / 4.0,
            k: -2 * (total - (i as i32 + 1)),
        });
    }
    for (k, c) in b_coeffs.iter().enumerate() {
        terms.push(RadialTerm {
            c: *c,
            a: nu_l2.conj() / 4.0,
            k: -2 * (total - (k as i32 + 1)),
        });
    }
    Ok(RadialSum::from_terms(terms))
}

/// A particular solution `h` of `(kappa theta + 2) h = e^{b rho^2} rho^{t}`
/// with `theta = rho d/drho`, for `t + 2/kappa = 2m`, `m >= 1`.
fn invert_atom(kappa_inv: i32, b: Complex64, t: i32) -> Result<RadialSum> {
    let two_m = t + 2 * kappa_inv;
    if two_m < 2 || two_m % 2 != 0 {
        return Err(TsmError::Unsupported(format!(
            "source rho^{t} against 1/kappa = {kappa_inv} leaves the Gaussian-power class"
        )));
    }
    let m = two_m / 2;
    let kappa = 1.0 / kappa_inv as f64;
    let shift = -2 * kappa_inv;
    if b.norm() == 0.0 {
        return Ok(RadialSum::power(2 * m + shift).scale(Complex64::new(1.0 / (2.0 * m as f64 * kappa), 0.0)));
    }
    // int e^{bu} u^{m-1} du = e^{bu} sum_j (-1)^j (m-1)!/(m-1-j)! u^{m-1-j} / b^{j+1}
    let mut terms = Vec::with_capacity(m as usize);
    let mut falling = 1.0;
    for j in 0..m {
        if j > 0 {
            falling *= (m - j) as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        terms.push(RadialTerm {
            c: sign * falling / (2.0 * kappa) / b.powi(j + 1),
            a: b,
            k: 2 * (m - 1 - j) + shift,
        });
    }
    Ok(RadialSum::from_terms(terms))
}

/// Kernel elements of the `chain_schedule` stack: the `A` terms as in
/// `solution_family`, and for each `B_k` the preimage under the `D` block of
/// `e^{conj(nu_l2) rho^2/4} rho^{-2(n+q-k)}`, which spans the kernel of the
/// `Dbar` block.
pub fn coupled_kernel_family(
    p: usize,
    q: usize,
    n: usize,
    nu_l1: Complex64,
    nu_l2: Complex64,
    a_coeffs: &[Complex64],
    b_coeffs: &[Complex64],
) -> Result<RadialSum> {
    let mut out = solution_family(p, 0, n + q, nu_l1, nu_l2, a_coeffs, &[])?;
    if b_coeffs.len() != q {
        return Err(TsmError::Invalid(format!(
            "expected {q} B coefficients, got {}",
            b_coeffs.len()
        )));
    }
    let a_target = nu_l2.conj() / 4.0;
    let b = (nu_l1 + nu_l2.conj()) / 4.0;
    // 1/kappa_i for the D atoms
    let inv: Vec<i32> = (1..=p).map(|i| (n + p + q - i) as i32).collect();
    for (k, bk) in b_coeffs.iter().enumerate() {
        let t = -2 * (n + q - (k + 1)) as i32;
        let mut h = RadialSum::zero();
        for (i, &ki) in inv.iter().enumerate() {
            // partial-fraction weight 1 / prod_{j != i} (kappa_j x_i + 2), x_i = -2/kappa_i
            let xi = -2.0 * ki as f64;
            let w: f64 = inv
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &kj)| 1.0 / (xi / kj as f64 + 2.0))
                .product();
            h = h.add(&invert_atom(ki, b, t)?.scale(Complex64::new(w, 0.0)));
        }
        if p == 0 {
            h = RadialSum::term(Complex64::new(1.0, 0.0), b, t);
        }
        // f = e^{-nu_l1 rho^2/4} h, with the combined exponent pinned to conj(nu_l2)/4
        let f = RadialSum::from_terms(
            h.terms()
                .iter()
                .map(|term| RadialTerm {
                    c: term.c * bk,
                    a: if term.a == b { a_target } else { term.a - nu_l1 / 4.0 },
                    k: term.k,
                })
                .collect(),
        );
        out = out.add(&f);
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AnnihilationReport {
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub surviving_terms: usize,
}

pub const ANNIHILATION_TOL: f64 = 1e-12;

pub fn annihilation_check(stack: &OperatorStack, a: &RadialSum) -> AnnihilationReport {
    let out = stack.apply(a);
    let residual = out.max_abs_coeff();
    AnnihilationReport {
        residual,
        tolerance: ANNIHILATION_TOL,
        passed: residual <= ANNIHILATION_TOL,
        surviving_terms: out.terms().len(),
    }
}

/// `sum_i a~_i(rho) P_i(z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeFunction {
    n: usize,
    pub summands: Vec<(RadialSum, BiPolynomial)>,
}

impl TypeFunction {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            summands: Vec::new(),
        }
    }

    pub fn new(radial: RadialSum, angular: BiPolynomial) -> Self {
        let n = angular.n();
        Self {
            n,
            summands: vec![(radial, angular)],
        }
    }

    pub fn radial(n: usize, radial: RadialSum) -> Self {
        Self::new(radial, BiPolynomial::one(n))
    }

    pub fn polynomial(p: BiPolynomial) -> Self {
        Self::new(RadialSum::one(), p)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        let rho = crate::coords::norm(z);
        self.summands
            .iter()
            .map(|(r, p)| r.eval(rho) * p.eval(z))
            .sum()
    }

    /// `[{"radial": [...], "poly": [...]}, ...]`.
    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::Value::Array(
            self.summands
                .iter()
                .map(|(r, p)| serde_json::json!({ "radial": r.to_json_value(), "poly": p.to_json_value() }))
                .collect(),
        )
    }

    /// Inverse of `to_json_value`. A missing `radial` means 1 and a missing
    /// `poly` means the constant 1.
    pub fn from_json_value(n: usize, value: &serde_json::Value) -> Result<Self> {
        let items = value
            .as_array()
            .ok_or_else(|| TsmError::Invalid("type function must be a JSON array of summands".into()))?;
        let mut out = Self::zero(n);
        for item in items {
            let radial = match item.get("radial") {
                Some(v) => RadialSum::from_json_value(v)?,
                None => RadialSum::one(),
            };
            let poly = match item.get("poly") {
                Some(v) => BiPolynomial::from_json_value(n, v)?,
                None => BiPolynomial::one(n),
            };
            out.summands.push((radial, poly));
        }
        Ok(out)
    }

    /// Whether any radial factor carries a negative power (singular at 0).
    pub fn singular_at_origin(&self) -> bool {
        self.summands
            .iter()
            .any(|(r, p)| !p.is_zero() && r.min_power().is_some_and(|k| k < 0))
    }

    pub fn add(&self, other: &TypeFunction) -> TypeFunction {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let mut summands = self.summands.clone();
        summands.extend(other.summands.iter().cloned());
        TypeFunction { n: self.n, summands }.simplify()
    }

    pub fn scale(&self, c: Complex64) -> TypeFunction {
        TypeFunction {
            n: self.n,
            summands: self
                .summands
                .iter()
                .map(|(r, p)| (r.scale(c), p.clone()))
                .collect(),
        }
        .simplify()
    }

    pub fn mul_radial(&self, r: &RadialSum) -> TypeFunction {
        TypeFunction {
            n: self.n,
            summands: self
                .summands
                .iter()
                .map(|(a, p)| (a.mul(r), p.clone()))
                .collect(),
        }
        .simplify()
    }

    pub fn mul_poly(&self, q: &BiPolynomial) -> TypeFunction {
        TypeFunction {
            n: self.n,
            summands: self
                .summands
                .iter()
                .map(|(a, p)| (a.clone(), p * q))
                .collect(),
        }
        .simplify()
    }

    pub fn mul_z(&self, j: usize) -> TypeFunction {
        self.mul_poly(&BiPolynomial::z(self.n, j))
    }

    pub fn mul_zbar(&self, j: usize) -> TypeFunction {
        self.mul_poly(&BiPolynomial::zbar(self.n, j))
    }

    /// `|z|^2` is absorbed into the radial part.
    pub fn mul_norm_sq(&self) -> TypeFunction {
        self.mul_radial(&RadialSum::power(2))
    }

    /// `d/dz_j (a~ P) = ((1/2rho) a~') zbar_j P + a~ dP/dz_j`.
    pub fn d_z(&self, j: usize) -> TypeFunction {
        self.derivative(j, false)
    }

    pub fn d_zbar(&self, j: usize) -> TypeFunction {
        self.derivative(j, true)
    }

    fn derivative(&self, j: usize, bar: bool) -> TypeFunction {
        let mut summands = Vec::with_capacity(2 * self.summands.len());
        for (a, p) in &self.summands {
            let r1 = a.half_inv_rho_d_rho();
            let (mult, dp) = if bar {
                (BiPolynomial::z(self.n, j), p.d_zbar(j))
            } else {
                (BiPolynomial::zbar(self.n, j), p.d_z(j))
            };
            summands.push((r1, p * &mult));
            summands.push((a.clone(), dp));
        }
        TypeFunction { n: self.n, summands }.simplify()
    }

    /// Canonical form: one summand per monomial, radial coefficients merged.
    pub fn simplify(&self) -> TypeFunction {
        let mut by_monomial: BTreeMap<Monomial, RadialSum> = BTreeMap::new();
        for (a, p) in &self.summands {
            for (m, c) in p.terms() {
                let entry = by_monomial.entry(m.clone()).or_default();
                *entry = entry.add(&a.scale(*c));
            }
        }
        let summands = by_monomial
            .into_iter()
            .filter(|(_, r)| !r.is_zero())
            .map(|(m, r)| {
                let p = BiPolynomial::from_terms(self.n, [(m, Complex64::new(1.0, 0.0))]);
                (r, p)
            })
            .collect();
        TypeFunction { n: self.n, summands }
    }

    pub fn is_zero(&self) -> bool {
        self.simplify().summands.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.simplify()
            .summands
            .iter()
            .fold(0.0, |acc, (r, _)| acc.max(r.max_abs_coeff()))
    }
}

/// Twisted field `Z_j` (or `Zbar_j`) from a coefficient table:
/// `Z_j = d/dz_j + 1/4 sum_l (eta_{lj} z_l + nu_{lj} zbar_l)`,
/// `Zbar_j = d/dzbar_j - 1/4 sum_l (conj(nu_{lj}) z_l + conj(eta_{lj}) zbar_l)`.
pub fn apply_z_table(table: &TwistTable, j: usize, bar: bool, f: &TypeFunction) -> TypeFunction {
    let n = f.n();
    let mut mult = BiPolynomial::zero(n);
    for l in 0..n {
        let (eta, nu) = (table.eta[(l, j)], table.nu[(l, j)]);
        let (cz, czb) = if bar {
            (-nu.conj() / 4.0, -eta.conj() / 4.0)
        } else {
            (eta / 4.0, nu / 4.0)
        };
        mult = &mult + &BiPolynomial::z(n, l).scale(cz);
        mult = &mult + &BiPolynomial::zbar(n, l).scale(czb);
    }
    let d = if bar { f.d_zbar(j) } else { f.d_z(j) };
    d.add(&f.mul_poly(&mult))
}

/// Reduced fields `Z~_j = d/dz_j - (mu_j/4) zbar_j` and
/// `Z~*_j = d/dzbar_j + (mu_j/4) z_j`.
pub fn apply_z_reduced(mu: &[f64], j: usize, bar: bool, f: &TypeFunction) -> TypeFunction {
    let c = Complex64::new(mu[j] / 4.0, 0.0);
    if bar {
        f.d_zbar(j).add(&f.mul_z(j).scale(c))
    } else {
        f.d_z(j).add(&f.mul_zbar(j).scale(-c))
    }
}

pub fn apply_z(
    group: &StepTwoGroup,
    lambda: &[f64],
    j: usize,
    bar: bool,
    f: &TypeFunction,
    reduced: bool,
) -> Result<TypeFunction> {
    if f.n() != group.n() || j >= group.n() {
        return Err(TsmError::Dimension(format!(
            "field index {j} or function dimension {} does not match n = {}",
            f.n(),
            group.n()
        )));
    }
    if reduced {
        let frame = reduce_group(group, lambda)?;
        Ok(apply_z_reduced(&frame.mu, j, bar, f))
    } else {
        let table = twist_coefficients(group, lambda)?;
        Ok(apply_z_table(&table, j, bar, f))
    }
}
