//! Sparse polynomials in `z` and `z-bar` with complex coefficients.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsmError};

/// Coefficients at or below this modulus are dropped.
pub const PRUNE_TOL: f64 = 1e-15;

/// A bi-multi-index `(alpha, beta)` for `z^alpha zbar^beta`.
///
/// Ordering is graded lexicographic on `(|alpha|+|beta|, alpha, beta)`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial {
    degree: u32,
    alpha: Vec<u32>,
    beta: Vec<u32>,
}

impl Monomial {
    pub fn new(alpha: Vec<u32>, beta: Vec<u32>) -> Self {
        assert_eq!(alpha.len(), beta.len(), "bi-index length mismatch");
        let degree = alpha.iter().chain(&beta).sum();
        Self {
            degree,
            alpha,
            beta,
        }
    }

    pub fn one(n: usize) -> Self {
        Self::new(vec![0; n], vec![0; n])
    }

    pub fn alpha(&self) -> &[u32] {
        &self.alpha
    }

    pub fn beta(&self) -> &[u32] {
        &self.beta
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn bidegree(&self) -> (u32, u32) {
        (self.alpha.iter().sum(), self.beta.iter().sum())
    }

    fn times(&self, other: &Monomial) -> Monomial {
        let alpha = self.alpha.iter().zip(&other.alpha).map(|(a, b)| a + b).collect();
        let beta = self.beta.iter().zip(&other.beta).map(|(a, b)| a + b).collect();
        Monomial::new(alpha, beta)
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        let mut v = Complex64::new(1.0, 0.0);
        for (l, zl) in z.iter().enumerate() {
            if self.alpha[l] > 0 {
                v *= zl.powu(self.alpha[l]);
            }
            if self.beta[l] > 0 {
                v *= zl.conj().powu(self.beta[l]);
            }
        }
        v
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiPolynomial {
    n: usize,
    terms: BTreeMap<Monomial, Complex64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct TermRecord {
    alpha: Vec<u32>,
    beta: Vec<u32>,
    re: f64,
    im: f64,
}

impl BiPolynomial {
    pub fn zero(n: usize) -> Self {
        Self {
            n,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(n: usize, c: Complex64) -> Self {
        Self::monomial(n, vec![0; n], vec![0; n], c)
    }

    pub fn one(n: usize) -> Self {
        Self::constant(n, Complex64::new(1.0, 0.0))
    }

    pub fn monomial(n: usize, alpha: Vec<u32>, beta: Vec<u32>, c: Complex64) -> Self {
        assert!(alpha.len() == n && beta.len() == n, "bi-index length must be n");
        let mut p = Self::zero(n);
        p.add_term(Monomial::new(alpha, beta), c);
        p
    }

    /// The coordinate `z_j` (zero-based `j`).
    pub fn z(n: usize, j: usize) -> Self {
        let mut alpha = vec![0; n];
        alpha[j] = 1;
        Self::monomial(n, alpha, vec![0; n], Complex64::new(1.0, 0.0))
    }

    pub fn zbar(n: usize, j: usize) -> Self {
        let mut beta = vec![0; n];
        beta[j] = 1;
        Self::monomial(n, vec![0; n], beta, Complex64::new(1.0, 0.0))
    }

    /// `|z|^2 = sum_j z_j zbar_j`.
    pub fn norm_sq(n: usize) -> Self {
        let mut p = Self::zero(n);
        for j in 0..n {
            let mut e = vec![0; n];
            e[j] = 1;
            p.add_term(Monomial::new(e.clone(), e), Complex64::new(1.0, 0.0));
        }
        p
    }

    pub fn from_terms<I>(n: usize, terms: I) -> Self
    where
        I: IntoIterator<Item = (Monomial, Complex64)>,
    {
        let mut p = Self::zero(n);
        for (m, c) in terms {
            assert_eq!(m.alpha.len(), n, "bi-index length must be n");
            p.add_term(m, c);
        }
        p
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Complex64)> {
        self.terms.iter()
    }

    pub fn coeff(&self, alpha: &[u32], beta: &[u32]) -> Complex64 {
        self.terms
            .get(&Monomial::new(alpha.to_vec(), beta.to_vec()))
            .copied()
            .unwrap_or_default()
    }

    pub fn add_term(&mut self, m: Monomial, c: Complex64) {
        let v = self.terms.get(&m).copied().unwrap_or_default() + c;
        if v.norm() <= PRUNE_TOL {
            self.terms.remove(&m);
        } else {
            self.terms.insert(m, v);
        }
    }

    fn prune(mut self) -> Self {
        self.terms.retain(|_, c| c.norm() > PRUNE_TOL);
        self
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |acc, c| acc.max(c.norm()))
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            n: self.n,
            terms: self.terms.iter().map(|(m, v)| (m.clone(), v * c)).collect(),
        }
        .prune()
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.scale(Complex64::new(c, 0.0))
    }

    /// Complex conjugate as a function: swaps `alpha` and `beta`.
    pub fn conjugate(&self) -> Self {
        Self {
            n: self.n,
            terms: self
                .terms
                .iter()
                .map(|(m, c)| (Monomial::new(m.beta.clone(), m.alpha.clone()), c.conj()))
                .collect(),
        }
    }

    /// `Some((p, q))` when every term has bi-degree `(p, q)`; `None` for
    /// mixed input or the zero polynomial.
    pub fn bidegree(&self) -> Option<(u32, u32)> {
        let mut it = self.terms.keys().map(Monomial::bidegree);
        let first = it.next()?;
        it.all(|d| d == first).then_some(first)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    /// Splits into bi-homogeneous parts.
    pub fn homogeneous_parts(&self) -> BTreeMap<(u32, u32), BiPolynomial> {
        let mut out: BTreeMap<(u32, u32), BiPolynomial> = BTreeMap::new();
        for (m, c) in &self.terms {
            out.entry(m.bidegree())
                .or_insert_with(|| BiPolynomial::zero(self.n))
                .terms
                .insert(m.clone(), *c);
        }
        out
    }

    pub fn d_z(&self, j: usize) -> Self {
        self.derivative(j, false)
    }

    pub fn d_zbar(&self, j: usize) -> Self {
        self.derivative(j, true)
    }

    fn derivative(&self, j: usize, bar: bool) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            let e = if bar { m.beta[j] } else { m.alpha[j] };
            if e == 0 {
                continue;
            }
            let (mut alpha, mut beta) = (m.alpha.clone(), m.beta.clone());
            if bar {
                beta[j] -= 1;
            } else {
                alpha[j] -= 1;
            }
            *out.terms.entry(Monomial::new(alpha, beta)).or_default() += c * e as f64;
        }
        out.prune()
    }

    pub fn mul_z(&self, j: usize) -> Self {
        self * &Self::z(self.n, j)
    }

    pub fn mul_zbar(&self, j: usize) -> Self {
        self * &Self::zbar(self.n, j)
    }

    pub fn mul_norm_sq_pow(&self, k: u32) -> Self {
        let r = Self::norm_sq(self.n);
        (0..k).fold(self.clone(), |acc, _| &acc * &r)
    }

    /// `4 sum_j d^2 / dz_j dzbar_j`.
    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.n);
        for (m, c) in &self.terms {
            for j in 0..self.n {
                let (a, b) = (m.alpha[j], m.beta[j]);
                if a == 0 || b == 0 {
                    continue;
                }
                let (mut alpha, mut beta) = (m.alpha.clone(), m.beta.clone());
                alpha[j] -= 1;
                beta[j] -= 1;
                *out.terms.entry(Monomial::new(alpha, beta)).or_default() +=
                    c * (4.0 * a as f64 * b as f64);
            }
        }
        out.prune()
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        debug_assert_eq!(z.len(), self.n);
        self.terms.iter().map(|(m, c)| c * m.eval(z)).sum()
    }

    /// Substitutes `z_l = sum_k a[l][k] w_k + b[l][k] wbar_k`; the conjugate
    /// `zbar_l` follows automatically.
    pub fn linear_substitute(&self, a: &[Vec<Complex64>], b: &[Vec<Complex64>]) -> Self {
        let n = self.n;
        let zs: Vec<BiPolynomial> = (0..n)
            .map(|l| {
                let mut p = Self::zero(n);
                for k in 0..n {
                    p = &p + &Self::z(n, k).scale(a[l][k]);
                    p = &p + &Self::zbar(n, k).scale(b[l][k]);
                }
                p
            })
            .collect();
        let zbs: Vec<BiPolynomial> = zs.iter().map(BiPolynomial::conjugate).collect();

        let mut zpow: Vec<Vec<BiPolynomial>> = vec![vec![Self::one(n)]; n];
        let mut zbpow: Vec<Vec<BiPolynomial>> = vec![vec![Self::one(n)]; n];
        let power = |cache: &mut Vec<BiPolynomial>, base: &BiPolynomial, e: usize| {
            while cache.len() <= e {
                let next = cache.last().unwrap() * base;
                cache.push(next);
            }
            cache[e].clone()
        };

        let mut out = Self::zero(n);
        for (m, c) in &self.terms {
            let mut acc = Self::constant(n, *c);
            for l in 0..n {
                if m.alpha[l] > 0 {
                    acc = &acc * &power(&mut zpow[l], &zs[l], m.alpha[l] as usize);
                }
                if m.beta[l] > 0 {
                    acc = &acc * &power(&mut zbpow[l], &zbs[l], m.beta[l] as usize);
                }
            }
            out = &out + &acc;
        }
        out
    }

    /// `Q(w) = P(z - w)` as a polynomial in `w`.
    pub fn reflect_translate(&self, z: &[Complex64]) -> Self {
        let n = self.n;
        let lin: Vec<BiPolynomial> = (0..n)
            .map(|l| &Self::constant(n, z[l]) - &Self::z(n, l))
            .collect();
        let lin_bar: Vec<BiPolynomial> = lin.iter().map(BiPolynomial::conjugate).collect();
        let mut out = Self::zero(n);
        for (m, c) in &self.terms {
            let mut acc = Self::constant(n, *c);
            for l in 0..n {
                for _ in 0..m.alpha[l] {
                    acc = &acc * &lin[l];
                }
                for _ in 0..m.beta[l] {
                    acc = &acc * &lin_bar[l];
                }
            }
            out = &out + &acc;
        }
        out
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        let records: Vec<TermRecord> = self
            .terms
            .iter()
            .map(|(m, c)| TermRecord {
                alpha: m.alpha.clone(),
                beta: m.beta.clone(),
                re: c.re,
                im: c.im,
            })
            .collect();
        serde_json::to_value(records).expect("term records serialize")
    }

    /// Parses a list of `{"alpha", "beta", "re", "im"}` records. `n` is
    /// needed to type the empty list.
    pub fn from_json_value(n: usize, value: &serde_json::Value) -> Result<Self> {
        let records: Vec<TermRecord> = serde_json::from_value(value.clone())?;
        let mut p = Self::zero(n);
        for r in records {
            if r.alpha.len() != n || r.beta.len() != n {
                return Err(TsmError::Dimension(format!(
                    "term has index lengths {}/{}, expected {n}",
                    r.alpha.len(),
                    r.beta.len()
                )));
            }
            p.add_term(Monomial::new(r.alpha, r.beta), Complex64::new(r.re, r.im));
        }
        Ok(p)
    }
}

impl Add for &BiPolynomial {
    type Output = BiPolynomial;
    fn add(self, rhs: &BiPolynomial) -> BiPolynomial {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            *out.terms.entry(m.clone()).or_default() += c;
        }
        out.prune()
    }
}

impl Sub for &BiPolynomial {
    type Output = BiPolynomial;
    fn sub(self, rhs: &BiPolynomial) -> BiPolynomial {
        self + &(-rhs)
    }
}

impl Neg for &BiPolynomial {
    type Output = BiPolynomial;
    fn neg(self) -> BiPolynomial {
        BiPolynomial {
            n: self.n,
            terms: self.terms.iter().map(|(m, c)| (m.clone(), -c)).collect(),
        }
    }
}

impl Mul for &BiPolynomial {
    type Output = BiPolynomial;
    fn mul(self, rhs: &BiPolynomial) -> BiPolynomial {
        assert_eq!(self.n, rhs.n, "dimension mismatch");
        let mut out = BiPolynomial::zero(self.n);
        for (m1, c1) in &self.terms {
            for (m2, c2) in &rhs.terms {
                *out.terms.entry(m1.times(m2)).or_default() += c1 * c2;
            }
        }
        out.prune()
    }
}

impl fmt::Display for BiPolynomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let mut first = true;
        for (m, c) in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({c})")?;
            for (l, &e) in m.alpha.iter().enumerate() {
                if e > 0 {
                    write!(f, "*z{}^{}", l + 1, e)?;
                }
            }
            for (l, &e) in m.beta.iter().enumerate() {
                if e > 0 {
                    write!(f, "*zb{}^{}", l + 1, e)?;
                }
            }
        }
        Ok(())
    }
}

/// All bi-indices of bi-degree `(p, q)` in `n` variables.
pub fn monomials_of_bidegree(n: usize, p: u32, q: u32) -> Vec<Monomial> {
    let alphas = compositions(n, p);
    let betas = compositions(n, q);
    let mut out = Vec::with_capacity(alphas.len() * betas.len());
    for a in &alphas {
        for b in &betas {
            out.push(Monomial::new(a.clone(), b.clone()));
        }
    }
    out.sort();
    out
}

/// Weak compositions of `total` into `n` parts.
pub fn compositions(n: usize, total: u32) -> Vec<Vec<u32>> {
    if n == 0 {
        return if total == 0 { vec![vec![]] } else { vec![] };
    }
    if n == 1 {
        return vec![vec![total]];
    }
    let mut out = Vec::new();
    for first in (0..=total).rev() {
        for mut rest in compositions(n - 1, total - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn laplacian_examples() {
        let p = &BiPolynomial::z(2, 0) * &BiPolynomial::zbar(2, 1);
        assert!(p.laplacian().is_zero());
        let p = &BiPolynomial::z(2, 0) * &BiPolynomial::zbar(2, 0);
        assert_eq!(p.laplacian(), BiPolynomial::constant(2, c(4.0)));
        assert_eq!(
            BiPolynomial::norm_sq(2).laplacian(),
            BiPolynomial::constant(2, c(8.0))
        );
    }

    #[test]
    fn laplacian_matches_real_second_differences() {
        // z1^2 zbar1 zbar2 at a sample point, against a central-difference Laplacian
        let p = BiPolynomial::monomial(2, vec![2, 0], vec![1, 1], Complex64::new(0.7, -0.2));
        let z = [Complex64::new(0.3, -0.4), Complex64::new(0.5, 0.2)];
        let h = 1e-3;
        let mut lap = Complex64::default();
        for l in 0..2 {
            for dir in [Complex64::new(h, 0.0), Complex64::new(0.0, h)] {
                let mut zp = z;
                let mut zm = z;
                zp[l] += dir;
                zm[l] -= dir;
                lap += (p.eval(&zp) - 2.0 * p.eval(&z) + p.eval(&zm)) / (h * h);
            }
        }
        assert!((lap - p.laplacian().eval(&z)).norm() < 1e-5);
    }

    #[test]
    fn pruning_drops_cancelled_terms() {
        let p = BiPolynomial::z(1, 0);
        assert!((&p - &p).is_zero());
        let tiny = BiPolynomial::constant(1, c(1e-16));
        assert!(tiny.is_zero());
    }

    #[test]
    fn graded_lex_order() {
        let mut keys = monomials_of_bidegree(2, 1, 0);
        keys.push(Monomial::one(2));
        keys.sort();
        assert_eq!(keys[0], Monomial::one(2));
        assert_eq!(keys.len(), 3);
        assert_eq!(compositions(3, 2).len(), 6);
    }

    #[test]
    fn bidegree_detection() {
        let p = &BiPolynomial::z(2, 0) * &BiPolynomial::zbar(2, 1);
        assert_eq!(p.bidegree(), Some((1, 1)));
        let q = &p + &BiPolynomial::one(2);
        assert_eq!(q.bidegree(), None);
        assert_eq!(q.homogeneous_parts().len(), 2);
    }

    #[test]
    fn derivatives_and_products() {
        let p = BiPolynomial::monomial(1, vec![3], vec![2], c(2.0));
        assert_eq!(p.d_z(0), BiPolynomial::monomial(1, vec![2], vec![2], c(6.0)));
        assert_eq!(p.d_zbar(0), BiPolynomial::monomial(1, vec![3], vec![1], c(4.0)));
        assert_eq!(p.mul_zbar(0), BiPolynomial::monomial(1, vec![3], vec![3], c(2.0)));
    }

    #[test]
    fn identity_substitution_is_noop() {
        let p = &BiPolynomial::monomial(2, vec![1, 1], vec![0, 2], Complex64::new(1.0, 2.0))
            + &BiPolynomial::z(2, 1);
        let id = vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]];
        let zero = vec![vec![c(0.0); 2]; 2];
        assert_eq!(p.linear_substitute(&id, &zero), p);
    }

    #[test]
    fn substitution_agrees_with_evaluation() {
        let p = &BiPolynomial::monomial(2, vec![2, 0], vec![0, 1], Complex64::new(0.5, -1.0))
            + &BiPolynomial::monomial(2, vec![0, 1], vec![1, 1], c(3.0));
        let a = vec![
            vec![Complex64::new(0.3, 0.1), Complex64::new(-0.2, 0.4)],
            vec![Complex64::new(0.0, 1.0), Complex64::new(0.5, 0.5)],
        ];
        let b = vec![
            vec![Complex64::new(0.1, 0.0), Complex64::new(0.0, -0.3)],
            vec![Complex64::new(0.2, 0.2), Complex64::new(-1.0, 0.0)],
        ];
        let w = [Complex64::new(0.4, -0.7), Complex64::new(-0.1, 0.9)];
        let z: Vec<Complex64> = (0..2)
            .map(|l| (0..2).map(|k| a[l][k] * w[k] + b[l][k] * w[k].conj()).sum())
            .collect();
        let q = p.linear_substitute(&a, &b);
        assert!((q.eval(&w) - p.eval(&z)).norm() < 1e-12);
    }

    #[test]
    fn reflect_translate_matches_evaluation() {
        let p = &BiPolynomial::monomial(2, vec![2, 0], vec![1, 1], Complex64::new(0.3, 0.4))
            + &BiPolynomial::zbar(2, 1);
        let z = [Complex64::new(0.5, -0.1), Complex64::new(-0.3, 0.7)];
        let w = [Complex64::new(0.2, 0.2), Complex64::new(0.9, -0.4)];
        let zw: Vec<Complex64> = z.iter().zip(&w).map(|(a, b)| a - b).collect();
        assert!((p.reflect_translate(&z).eval(&w) - p.eval(&zw)).norm() < 1e-14);
    }

    #[test]
    fn json_roundtrip() {
        let p = &BiPolynomial::monomial(2, vec![1, 0], vec![0, 1], Complex64::new(1.5, -2.0))
            + &BiPolynomial::one(2);
        let v = p.to_json_value();
        assert_eq!(v[0]["alpha"], serde_json::json!([0, 0]));
        assert_eq!(BiPolynomial::from_json_value(2, &v).unwrap(), p);
        let bad = serde_json::json!([{"alpha": [1], "beta": [0], "re": 1.0, "im": 0.0}]);
        assert!(BiPolynomial::from_json_value(2, &bad).is_err());
    }
}
