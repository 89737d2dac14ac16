//! Twisted spherical means, twisted convolution and Laguerre functions.
//!
//! All means share one kernel: the average over `|w| = s` of
//! `f(z - w) exp((i/2) <x, V xi>)`, where `x`, `xi` realify `z`, `w`. The
//! group mean uses `V = sum_j lambda_j U^(j)`; the reduced mean uses the
//! canonical block built from `mu`.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::coords::{apply_real, norm, realify};
use crate::error::{Result, TsmError};
use crate::group::StepTwoGroup;
use crate::harmonics::{compose_real, pull_back_poly, sphere_moment, HARMONIC_TOL};
use crate::poly::BiPolynomial;
use crate::quadrature::{
    chunked_sum, gauss_gegenbauer, integrate_rule, sphere_rule, Estimate, QuadKind,
    QuadratureRule,
};
use crate::radial::{RadialSum, RadialTerm, TypeFunction};
use crate::reduce::{build_v, canonical_block, Direction, ReducedFrame};

/// Nodes closer than this to a declared singular point abort the mean.
pub const SINGULARITY_TOL: f64 = 1e-12;
/// Envelope level at which full-space integrals are truncated.
pub const TRUNCATION_EPS: f64 = 1e-14;
/// Largest supported `n`; evaluation uses fixed stack buffers.
pub const MAX_N: usize = 8;

type PointFn = dyn Fn(&[Complex64]) -> Complex64 + Send + Sync;

/// A function given only by point evaluation.
#[derive(Clone)]
pub struct OpaqueFn {
    pub n: usize,
    pub f: Arc<PointFn>,
    pub singular: Vec<Vec<Complex64>>,
    /// `r` such that `|f(z)| <~ e^{-r |z|^2 / 4}`; needed for convolution.
    pub envelope_rate: Option<f64>,
}

impl fmt::Debug for OpaqueFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OpaqueFn")
            .field("n", &self.n)
            .field("singular", &self.singular)
            .field("envelope_rate", &self.envelope_rate)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Evaluable {
    Closed(TypeFunction),
    Opaque(OpaqueFn),
}

impl From<TypeFunction> for Evaluable {
    fn from(f: TypeFunction) -> Self {
        Evaluable::Closed(f)
    }
}

impl Evaluable {
    pub fn opaque<F>(n: usize, f: F) -> Self
    where
        F: Fn(&[Complex64]) -> Complex64 + Send + Sync + 'static,
    {
        Evaluable::Opaque(OpaqueFn {
            n,
            f: Arc::new(f),
            singular: Vec::new(),
            envelope_rate: None,
        })
    }

    pub fn n(&self) -> usize {
        match self {
            Evaluable::Closed(t) => t.n(),
            Evaluable::Opaque(o) => o.n,
        }
    }

    pub fn eval(&self, z: &[Complex64]) -> Complex64 {
        match self {
            Evaluable::Closed(t) => t.eval(z),
            Evaluable::Opaque(o) => (o.f)(z),
        }
    }

    pub fn singular_points(&self) -> Vec<Vec<Complex64>> {
        match self {
            Evaluable::Closed(t) if t.singular_at_origin() => vec![vec![Complex64::default(); t.n()]],
            Evaluable::Closed(_) => Vec::new(),
            Evaluable::Opaque(o) => o.singular.clone(),
        }
    }

    /// Smallest Gaussian decay rate over the radial terms, if all decay.
    pub fn envelope_rate(&self) -> Option<f64> {
        match self {
            Evaluable::Closed(t) => {
                let mut rate = f64::INFINITY;
                for (r, p) in &t.summands {
                    if p.is_zero() {
                        continue;
                    }
                    for term in r.terms() {
                        let decay = -4.0 * term.a.re;
                        if decay <= 0.0 {
                            return None;
                        }
                        rate = rate.min(decay);
                    }
                }
                rate.is_finite().then_some(rate)
            }
            Evaluable::Opaque(o) => o.envelope_rate,
        }
    }

    /// `y -> f(M y)` for a real orthogonal `M`.
    pub fn compose(&self, m: &DMatrix<f64>) -> Evaluable {
        match self {
            Evaluable::Closed(t) => {
                let mut out = t.clone();
                for (_, p) in out.summands.iter_mut() {
                    *p = compose_real(p, m);
                }
                Evaluable::Closed(out)
            }
            Evaluable::Opaque(o) => {
                let inner = o.f.clone();
                let mm = m.clone();
                let mt = m.transpose();
                Evaluable::Opaque(OpaqueFn {
                    n: o.n,
                    f: Arc::new(move |y| inner(&apply_real(&mm, y))),
                    singular: o.singular.iter().map(|p| apply_real(&mt, p)).collect(),
                    envelope_rate: o.envelope_rate,
                })
            }
        }
    }
}

/// Flattened type function for the inner quadrature loops.
struct Compiled {
    summands: Vec<(Vec<RadialTerm>, Vec<(Complex64, Vec<u32>, Vec<u32>)>)>,
}

impl Compiled {
    fn new(t: &TypeFunction) -> Self {
        let summands = t
            .summands
            .iter()
            .map(|(r, p)| {
                let monos = p
                    .terms()
                    .map(|(m, c)| (*c, m.alpha().to_vec(), m.beta().to_vec()))
                    .collect();
                (r.terms().to_vec(), monos)
            })
            .collect();
        Self { summands }
    }

    fn eval(&self, u: &[Complex64]) -> Complex64 {
        let rho2: f64 = u.iter().map(|c| c.norm_sqr()).sum();
        let rho = rho2.sqrt();
        let mut total = Complex64::default();
        for (radial, monos) in &self.summands {
            let mut r = Complex64::default();
            for t in radial {
                let g = if t.a.im == 0.0 {
                    Complex64::new((t.a.re * rho2).exp(), 0.0)
                } else {
                    (t.a * rho2).exp()
                };
                r += t.c * g * rho.powi(t.k);
            }
            let mut a = Complex64::default();
            for (c, alpha, beta) in monos {
                let mut v = *c;
                for (l, ul) in u.iter().enumerate() {
                    if alpha[l] > 0 {
                        v *= ul.powu(alpha[l]);
                    }
                    if beta[l] > 0 {
                        v *= ul.conj().powu(beta[l]);
                    }
                }
                a += v;
            }
            total += r * a;
        }
        total
    }
}

enum Prepared<'a> {
    Fast(Compiled),
    Opaque(&'a OpaqueFn),
}

impl Prepared<'_> {
    fn new(f: &Evaluable) -> Prepared<'_> {
        match f {
            Evaluable::Closed(t) => Prepared::Fast(Compiled::new(t)),
            Evaluable::Opaque(o) => Prepared::Opaque(o),
        }
    }

    fn eval(&self, u: &[Complex64]) -> Complex64 {
        match self {
            Prepared::Fast(c) => c.eval(u),
            Prepared::Opaque(o) => (o.f)(u),
        }
    }
}

fn check_inputs(f: &Evaluable, z: &[Complex64], s: f64) -> Result<usize> {
    let n = f.n();
    if z.len() != n {
        return Err(TsmError::Dimension(format!("z has length {}, expected {n}", z.len())));
    }
    if n > MAX_N {
        return Err(TsmError::Unsupported(format!("n = {n} exceeds {MAX_N}")));
    }
    if !(s > 0.0) || !s.is_finite() {
        return Err(TsmError::Invalid(format!("radius must be positive, got {s}")));
    }
    Ok(n)
}

/// Average over `|w| = s` of `f(z - w) exp((i/2) <x, V xi>)`.
pub fn mean_with_matrix(
    v: &DMatrix<f64>,
    f: &Evaluable,
    z: &[Complex64],
    s: f64,
    rule: &QuadratureRule,
) -> Result<Estimate> {
    let n = check_inputs(f, z, s)?;
    if v.nrows() != 2 * n || v.ncols() != 2 * n {
        return Err(TsmError::Dimension("phase matrix must be 2n x 2n".into()));
    }
    // (i/2) <x, V xi> = (i/2) (V^T x) . xi
    let g: Vec<f64> = (v.transpose() * DVector::from_vec(realify(z)))
        .iter()
        .map(|c| 0.5 * c)
        .collect();
    if rule.kind == QuadKind::ExactMoments {
        return match f {
            Evaluable::Closed(t) => exact_mean(&g, t, z, s, rule.order),
            Evaluable::Opaque(_) => Err(TsmError::Unsupported(
                "exact moments need a closed-form function".into(),
            )),
        };
    }
    let singular = f.singular_points();
    let prepared = Prepared::new(f);
    let integrand = |i: usize, x: &[f64]| -> Result<Complex64> {
        let mut u = [Complex64::default(); MAX_N];
        let mut phase = 0.0;
        for l in 0..n {
            let (a, b) = (s * x[l], s * x[n + l]);
            u[l] = z[l] - Complex64::new(a, b);
            phase += g[l] * a + g[n + l] * b;
        }
        let u = &u[..n];
        for p in &singular {
            let d = u
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            if d <= SINGULARITY_TOL {
                return Err(TsmError::Singularity { node: i, distance: d });
            }
        }
        Ok(prepared.eval(u) * Complex64::from_polar(1.0, phase))
    };
    match rule.kind {
        QuadKind::ProductAngles => {
            let (value, _) = integrate_rule(&*sphere_rule(n, rule)?, &integrand)?;
            let coarse = QuadratureRule::product((rule.order / 2).max(1));
            let (coarse_value, _) = integrate_rule(&*sphere_rule(n, &coarse)?, &integrand)?;
            Ok(Estimate {
                value,
                err_estimate: (value - coarse_value).norm(),
            })
        }
        _ => {
            let (value, se) = integrate_rule(&*sphere_rule(n, rule)?, &integrand)?;
            Ok(Estimate {
                value,
                err_estimate: se.unwrap_or(f64::INFINITY),
            })
        }
    }
}

/// `u -> P(s u)`.
fn dilate(p: &BiPolynomial, s: f64) -> BiPolynomial {
    BiPolynomial::from_terms(
        p.n(),
        p.terms()
            .map(|(m, c)| (m.clone(), c * s.powi(m.degree() as i32))),
    )
}

fn unit_sphere_integral(p: &BiPolynomial) -> Complex64 {
    p.terms()
        .map(|(m, c)| c * sphere_moment(m.alpha(), m.beta(), p.n()))
        .sum()
}

/// Series path: the Gaussian factor and the phase are both exponentials
/// of a linear form in `(u, ubar)` on the unit sphere, expanded to the
/// order where the next term is bounded by `1e-16`.
fn exact_mean(
    g: &[f64],
    f: &TypeFunction,
    z: &[Complex64],
    s: f64,
    max_order: usize,
) -> Result<Estimate> {
    let n = z.len();
    let i = Complex64::new(0.0, 1.0);
    // phase: i sum_k g_k xi_k with xi_k = s Re u_k, xi_{n+k} = s Im u_k
    let phase_u: Vec<Complex64> = (0..n).map(|k| i * s * (g[k] - i * g[n + k]) / 2.0).collect();
    let phase_ub: Vec<Complex64> = (0..n).map(|k| i * s * (g[k] + i * g[n + k]) / 2.0).collect();
    let z2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let dist2 = dilate(&BiPolynomial::norm_sq(n).reflect_translate(z), s);

    let mut total = Complex64::default();
    let mut err = 0.0;
    for (radial, poly) in &f.summands {
        let angular = dilate(&poly.reflect_translate(z), s);
        for term in radial.terms() {
            if term.k < 0 || term.k % 2 != 0 {
                return Err(TsmError::Unsupported(format!(
                    "exact moments need even nonnegative radial powers, got rho^{}",
                    term.k
                )));
            }
            let mut m = angular.clone();
            for _ in 0..term.k / 2 {
                m = &m * &dist2;
            }
            // e^{a |z - s u|^2} = e^{a(|z|^2 + s^2)} e^{-a s (zbar.u + z.ubar)}
            let mut lin = BiPolynomial::zero(n);
            for k in 0..n {
                let cu = phase_u[k] - term.a * s * z[k].conj();
                let cub = phase_ub[k] - term.a * s * z[k];
                lin = &lin + &BiPolynomial::z(n, k).scale(cu);
                lin = &lin + &BiPolynomial::zbar(n, k).scale(cub);
            }
            let bound: f64 = lin.terms().map(|(_, c)| c.norm()).sum();
            let msum: f64 = m.terms().map(|(_, c)| c.norm()).sum();
            let mut acc = unit_sphere_integral(&m);
            let mut abs_acc = acc.norm();
            let mut power = m;
            let mut next_bound = msum;
            let mut converged = false;
            for j in 1..=max_order {
                power = (&power * &lin).scale_real(1.0 / j as f64);
                let contrib = unit_sphere_integral(&power);
                acc += contrib;
                abs_acc += contrib.norm();
                next_bound *= bound / (j + 1) as f64;
                if (j + 1) as f64 > 2.0 * bound && next_bound < 1e-16 {
                    converged = true;
                    break;
                }
            }
            if !converged && !(bound == 0.0) {
                return Err(TsmError::Truncation(format!(
                    "series for exponent {} did not converge within {max_order} terms",
                    term.a
                )));
            }
            let prefactor = term.c * (term.a * (z2 + s * s)).exp();
            total += prefactor * acc;
            err += prefactor.norm() * (2.0 * next_bound + f64::EPSILON * abs_acc);
        }
    }
    Ok(Estimate {
        value: total,
        err_estimate: err,
    })
}

/// Twisted spherical mean on the group for the central parameter `lambda`.
pub fn tsm(
    group: &StepTwoGroup,
    lambda: &[f64],
    f: &Evaluable,
    z: &[Complex64],
    s: f64,
    rule: &QuadratureRule,
) -> Result<Estimate> {
    if f.n() != group.n() {
        return Err(TsmError::Dimension(format!(
            "function has n = {}, group has n = {}",
            f.n(),
            group.n()
        )));
    }
    let v = build_v(group, lambda)?;
    mean_with_matrix(&v, f, z, s, rule)
}

/// Mean with the diagonal phase `(i/2) sum_j mu_j Im(z_j conj(w_j))`.
/// `mu = 0` gives the plain spherical mean.
pub fn reduced_tsm(
    mu: &[f64],
    f: &Evaluable,
    z: &[Complex64],
    s: f64,
    rule: &QuadratureRule,
) -> Result<Estimate> {
    if mu.len() != f.n() {
        return Err(TsmError::Dimension(format!(
            "mu has length {}, expected {}",
            mu.len(),
            f.n()
        )));
    }
    mean_with_matrix(&canonical_block(mu), f, z, s, rule)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct EquivalenceCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    pub err_estimate: f64,
}

/// Compares the group mean at `A z` with the reduced mean of `f(A .)` at `z`.
pub fn frame_equivalence_check(
    group: &StepTwoGroup,
    frame: &ReducedFrame,
    f: &Evaluable,
    z: &[Complex64],
    s: f64,
    rule: &QuadratureRule,
) -> Result<EquivalenceCheck> {
    let zt = frame.transport_point(z, Direction::Inverse);
    let lhs = tsm(group, &frame.lambda, f, &zt, s, rule)?;
    let fl = f.compose(&frame.a);
    let rhs = reduced_tsm(&frame.mu, &fl, z, s, rule)?;
    Ok(EquivalenceCheck {
        lhs: lhs.value,
        rhs: rhs.value,
        residual: (lhs.value - rhs.value).norm(),
        err_estimate: lhs.err_estimate.max(rhs.err_estimate),
    })
}

/// `e^{|lambda| |z|^2/4} P(z) |z|^{-2(n+p+q-i)}` with `P` given in reduced
/// coordinates and pulled back through the frame.
pub fn vanishing_kernel(
    frame: &ReducedFrame,
    lambda_norm: f64,
    p_reduced: &BiPolynomial,
    exponent_index: usize,
) -> Result<TypeFunction> {
    let n = frame.n();
    let (p, q) = p_reduced.bidegree().ok_or(TsmError::NotHomogeneous)?;
    let total = n + (p + q) as usize;
    if exponent_index > total {
        return Err(TsmError::Invalid(format!(
            "exponent index {exponent_index} exceeds n+p+q = {total}"
        )));
    }
    let k = -2 * (total - exponent_index) as i32;
    let radial = RadialSum::term(Complex64::new(1.0, 0.0), Complex64::new(lambda_norm / 4.0, 0.0), k);
    Ok(TypeFunction::new(radial, pull_back_poly(p_reduced, frame)))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ConvolutionRule {
    /// Tensor trapezoid with this many points per real axis.
    Grid { points: usize },
    /// Gaussian importance sampling.
    MonteCarlo { samples: usize, seed: u64 },
}

impl ConvolutionRule {
    /// `grid:M` or `mc:N`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let (kind, order) = spec
            .split_once(':')
            .ok_or_else(|| TsmError::Invalid(format!("convolution rule '{spec}' is not KIND:ORDER")))?;
        let order: usize = order
            .trim()
            .parse()
            .map_err(|_| TsmError::Invalid(format!("bad order in '{spec}'")))?;
        match kind.trim() {
            "grid" if order >= 2 => Ok(ConvolutionRule::Grid { points: order }),
            "mc" if order >= 2 => Ok(ConvolutionRule::MonteCarlo { samples: order, seed }),
            _ => Err(TsmError::Invalid(format!("unknown convolution rule '{spec}'"))),
        }
    }
}

/// Truncation radius for a Gaussian envelope `e^{-rate |w|^2 / 4}`.
pub fn truncation_radius(rate: f64, z_norm: f64) -> f64 {
    (-4.0 * TRUNCATION_EPS.ln() / rate).sqrt() + z_norm
}

/// `int_{C^n} f(z - w) g(w) e^{(i/2) lambda Im(z . conj(w))} dw` with
/// Lebesgue measure on `R^{2n}`.
pub fn twisted_convolution(
    lambda: f64,
    f: &Evaluable,
    g: &Evaluable,
    z: &[Complex64],
    rule: &ConvolutionRule,
) -> Result<Estimate> {
    let n = f.n();
    if g.n() != n || z.len() != n {
        return Err(TsmError::Dimension("f, g and z must share n".into()));
    }
    if n > 2 {
        return Err(TsmError::Unsupported(format!("convolution on C^{n} is out of range")));
    }
    if lambda == 0.0 {
        return Err(TsmError::ZeroLambda);
    }
    // Gaussian envelope of the integrand in w: rate and centre
    let (rate, centre_weight) = match (f.envelope_rate(), g.envelope_rate()) {
        (Some(a), Some(b)) => (a + b, a / (a + b)),
        (Some(a), None) => (a, 1.0),
        (None, Some(b)) => (b, 0.0),
        (None, None) => {
            return Err(TsmError::Truncation(
                "neither factor has a Gaussian envelope".into(),
            ))
        }
    };
    let pf = Prepared::new(f);
    let pg = Prepared::new(g);
    let integrand = |w: &[Complex64]| -> Complex64 {
        let mut u = [Complex64::default(); MAX_N];
        let mut phase = 0.0;
        for l in 0..n {
            u[l] = z[l] - w[l];
            phase += (z[l] * w[l].conj()).im;
        }
        pf.eval(&u[..n]) * pg.eval(w) * Complex64::from_polar(1.0, 0.5 * lambda * phase)
    };
    match *rule {
        ConvolutionRule::Grid { points } => {
            let slow = f.envelope_rate().into_iter().chain(g.envelope_rate()).fold(f64::INFINITY, f64::min);
            let radius = truncation_radius(slow, norm(z));
            let fine = grid_sum(n, points, radius, &integrand)?;
            let coarse = grid_sum(n, points.div_ceil(2).max(2), radius, &integrand)?;
            Ok(Estimate {
                value: fine,
                err_estimate: (fine - coarse).norm(),
            })
        }
        ConvolutionRule::MonteCarlo { samples, seed } => {
            let sigma = (2.0 / rate).sqrt();
            let d = 2 * n;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut draws = Vec::with_capacity(samples * d);
            for _ in 0..samples * d {
                let x: f64 = StandardNormal.sample(&mut rng);
                draws.push(sigma * x);
            }
            // density (2 pi sigma^2)^{-n} e^{-|w - c|^2 / (2 sigma^2)}
            let centre: Vec<Complex64> = z.iter().map(|zl| zl * centre_weight).collect();
            let norm_const = (2.0 * std::f64::consts::PI * sigma * sigma).powi(n as i32);
            let sample = |i: usize| {
                let x = &draws[i * d..(i + 1) * d];
                let mut w = [Complex64::default(); MAX_N];
                let mut r2 = 0.0;
                for l in 0..n {
                    w[l] = centre[l] + Complex64::new(x[l], x[n + l]);
                    r2 += x[l] * x[l] + x[n + l] * x[n + l];
                }
                integrand(&w[..n]) * norm_const * (r2 / (2.0 * sigma * sigma)).exp()
            };
            let total = chunked_sum(samples, |i| Ok(sample(i)))?;
            let mean = total / samples as f64;
            let second = chunked_sum(samples, |i| Ok(Complex64::new((sample(i) - mean).norm_sqr(), 0.0)))?;
            let var = second.re / (samples as f64 - 1.0);
            Ok(Estimate {
                value: mean,
                err_estimate: (var / samples as f64).sqrt(),
            })
        }
    }
}

fn grid_sum<F>(n: usize, points: usize, radius: f64, integrand: &F) -> Result<Complex64>
where
    F: Fn(&[Complex64]) -> Complex64 + Sync,
{
    let d = 2 * n;
    let h = 2.0 * radius / (points - 1) as f64;
    let total = points.pow(d as u32);
    let sum = chunked_sum(total, |mut idx| {
        let mut x = [0.0; 2 * MAX_N];
        for xi in x.iter_mut().take(d) {
            *xi = -radius + h * (idx % points) as f64;
            idx /= points;
        }
        let mut w = [Complex64::default(); MAX_N];
        for l in 0..n {
            w[l] = Complex64::new(x[l], x[n + l]);
        }
        Ok(integrand(&w[..n]))
    })?;
    Ok(sum * h.powi(d as i32))
}

/// Generalized Laguerre polynomial by the three-term recurrence.
pub fn laguerre(k: usize, alpha: f64, x: f64) -> f64 {
    let mut prev = 1.0;
    if k == 0 {
        return prev;
    }
    let mut cur = 1.0 + alpha - x;
    for j in 1..k {
        let jf = j as f64;
        let next = ((2.0 * jf + 1.0 + alpha - x) * cur - (jf + alpha) * prev) / (jf + 1.0);
        prev = cur;
        cur = next;
    }
    cur
}

/// `phi_{k,lambda}^{n-1}(z) = L_k^{n-1}(|lambda| |z|^2 / 2) e^{-|lambda| |z|^2 / 4}`.
pub fn laguerre_phi(k: usize, n: usize, lambda_norm: f64, z: &[Complex64]) -> f64 {
    let r2: f64 = z.iter().map(|c| c.norm_sqr()).sum();
    let x = lambda_norm * r2;
    laguerre(k, n as f64 - 1.0, x / 2.0) * (-x / 4.0).exp()
}

/// `phi_{k,lambda}^{n-1}` as a Gaussian-power sum, from the explicit
/// expansion `L_k^a(x) = sum_j (-1)^j C(k+a, k-j) x^j / j!`.
pub fn laguerre_radial(k: usize, n: usize, lambda_norm: f64) -> RadialSum {
    let a = n as f64 - 1.0;
    let gauss = Complex64::new(-lambda_norm / 4.0, 0.0);
    let mut terms = Vec::with_capacity(k + 1);
    // C(k+a, k-j) / j! built incrementally from j = 0
    let mut binom: f64 = (1..=k).map(|i| (a + i as f64) / i as f64).product();
    let mut inv_fact = 1.0;
    for j in 0..=k {
        if j > 0 {
            binom *= (k - j + 1) as f64 / (a + j as f64);
            inv_fact /= j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        let c = sign * binom * inv_fact * (lambda_norm / 2.0).powi(j as i32);
        terms.push(RadialTerm {
            c: Complex64::new(c, 0.0),
            a: gauss,
            k: 2 * j as i32,
        });
    }
    RadialSum::from_terms(terms)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HeckeReport {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
    /// `residual / |rhs|`, or the plain residual on the vanishing branch.
    pub relative: f64,
    pub vanishing_branch: bool,
    pub err_estimate: f64,
}

/// Compares `(P g) x_lambda phi_{k,lambda}^{n-1}(z)` with
/// `(|lambda|/2pi)^{p+q} P(z) (g x_lambda phi_{k',lambda}^{N-1})(z')` on
/// `C^N`, `N = n+p+q`, `z' = (|z|, 0, ..., 0)`; `k' = k-p` for `lambda > 0`
/// and `k-q` for `lambda < 0`. When `k'` would be negative the right side is 0.
#[allow(clippy::too_many_arguments)]
pub fn hecke_bochner_check(
    n: usize,
    p: u32,
    q: u32,
    k: usize,
    lambda: f64,
    g: &RadialSum,
    poly: &BiPolynomial,
    z: &[Complex64],
    rule: &ConvolutionRule,
) -> Result<HeckeReport> {
    if poly.n() != n || z.len() != n {
        return Err(TsmError::Dimension("P and z must have length n".into()));
    }
    if !poly.is_zero() {
        if poly.bidegree() != Some((p, q)) {
            return Err(TsmError::NotHomogeneous);
        }
        let lap = poly.laplacian().max_abs_coeff();
        if lap > HARMONIC_TOL * poly.max_abs_coeff().max(1.0) {
            return Err(TsmError::NotHarmonic(lap));
        }
    }
    let lam = lambda.abs();
    let f: Evaluable = TypeFunction::new(g.clone(), poly.clone()).into();
    let phi: Evaluable = TypeFunction::radial(n, laguerre_radial(k, n, lam)).into();
    let lhs = twisted_convolution(lambda, &f, &phi, z, rule)?;

    let shift = if lambda > 0.0 { p } else { q } as usize;
    if k < shift {
        let residual = lhs.value.norm();
        return Ok(HeckeReport {
            lhs: lhs.value,
            rhs: Complex64::default(),
            residual,
            relative: residual,
            vanishing_branch: true,
            err_estimate: lhs.err_estimate,
        });
    }
    let big_n = n + (p + q) as usize;
    let mut zp = vec![Complex64::default(); big_n];
    zp[0] = Complex64::new(norm(z), 0.0);
    let gn: Evaluable = TypeFunction::radial(big_n, g.clone()).into();
    let phin: Evaluable = TypeFunction::radial(big_n, laguerre_radial(k - shift, big_n, lam)).into();
    let inner = twisted_convolution(lambda, &gn, &phin, &zp, rule)?;
    let factor = (lam / (2.0 * std::f64::consts::PI)).powi((p + q) as i32) * poly.eval(z);
    let rhs = factor * inner.value;
    let residual = (lhs.value - rhs).norm();
    Ok(HeckeReport {
        lhs: lhs.value,
        rhs,
        residual,
        relative: if rhs.norm() > 0.0 { residual / rhs.norm() } else { residual },
        vanishing_branch: false,
        err_estimate: lhs.err_estimate + factor.norm() * inner.err_estimate,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OdeProbeReport {
    /// Largest residual of `F(r)/r - F(r0)/r0 - (mu/2) int_{r0}^r F`,
    /// divided by `max(1, max |F(r)/r|)`.
    pub max_residual: f64,
    pub residuals: Vec<f64>,
    /// `F(r0) / (r0 e^{mu r0^2/4})`, the constant of the solution
    /// `c r e^{mu r^2/4}` as seen from the first grid point.
    pub c_estimate: Complex64,
    pub tolerance: f64,
    pub passed: bool,
}

pub const ODE_TOL: f64 = 1e-10;

/// Checks the integral identity `(F(r)/r)' = (mu/2) F` in anchored form on
/// `r_grid`, integrating each interval with a Gauss-Legendre panel.
pub fn boundary_ode_probe_fn<F>(mu1: f64, f: F, r_grid: &[f64], panel_order: usize) -> Result<OdeProbeReport>
where
    F: Fn(f64) -> Result<Complex64>,
{
    if r_grid.len() < 2 {
        return Err(TsmError::Invalid("r grid needs at least two points".into()));
    }
    if r_grid[0] <= 0.0 || r_grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(TsmError::Invalid("r grid must be positive and increasing".into()));
    }
    let (nodes, weights) = gauss_gegenbauer(panel_order.max(1), 0.0);
    let r0 = r_grid[0];
    let f0 = f(r0)?;
    let anchor = f0 / r0;
    let mut integral = Complex64::default();
    let mut raw = Vec::with_capacity(r_grid.len());
    let mut scale: f64 = anchor.norm();
    raw.push(0.0);
    for w in r_grid.windows(2) {
        let (a, b) = (w[0], w[1]);
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        for (t, wt) in nodes.iter().zip(&weights) {
            // weights sum to one, so the panel length is 2 * half
            integral += f(mid + half * t)? * (wt * 2.0 * half);
        }
        let fb = f(b)?;
        scale = scale.max((fb / b).norm());
        raw.push((fb / b - anchor - integral * (mu1 / 2.0)).norm());
    }
    let denom = scale.max(1.0);
    let residuals: Vec<f64> = raw.iter().map(|r| r / denom).collect();
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    Ok(OdeProbeReport {
        max_residual,
        residuals,
        c_estimate: f0 / (r0 * (mu1 * r0 * r0 / 4.0).exp()),
        tolerance: ODE_TOL,
        passed: max_residual <= ODE_TOL,
    })
}

/// The probe with `F(t) = t^{2n-1} (g x~ mu_t)(z)` from reduced means.
pub fn boundary_ode_probe(
    mu: &[f64],
    g: &Evaluable,
    z: &[Complex64],
    r_grid: &[f64],
    rule: &QuadratureRule,
    panel_order: usize,
) -> Result<OdeProbeReport> {
    let n = g.n();
    let mu1 = *mu.first().ok_or_else(|| TsmError::Dimension("mu is empty".into()))?;
    boundary_ode_probe_fn(
        mu1,
        |t| Ok(reduced_tsm(mu, g, z, t, rule)?.value * t.powi(2 * n as i32 - 1)),
        r_grid,
        panel_order,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonics::conjugate_poly;
    use crate::reduce::reduce_group;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn gaussian(n: usize, a: f64) -> Evaluable {
        TypeFunction::radial(n, RadialSum::gaussian(c(a))).into()
    }

    #[test]
    fn constant_has_unit_mean_at_origin() {
        let one: Evaluable = TypeFunction::radial(2, RadialSum::one()).into();
        let g = StepTwoGroup::quaternionic();
        for rule in [QuadratureRule::product(6), QuadratureRule::exact(40)] {
            let m = tsm(&g, &[0.4, 1.0, -2.0], &one, &[c(0.0), c(0.0)], 1.7, &rule).unwrap();
            assert!((m.value - c(1.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn odd_function_has_zero_mean_at_origin() {
        let f: Evaluable = TypeFunction::polynomial(BiPolynomial::z(1, 0)).into();
        let h = StepTwoGroup::heisenberg(1);
        let m = tsm(&h, &[1.0], &f, &[c(0.0)], 0.8, &QuadratureRule::product(8)).unwrap();
        assert!(m.value.norm() < 1e-15);
    }

    #[test]
    fn zero_mu_is_the_euclidean_mean() {
        // plain sphere average of e^{-|z-w|^2} for n = 1: e^{-(|z|^2+s^2)} I_0(2|z|s)
        let f = gaussian(1, -1.0);
        let (z, s) = (0.6, 0.9);
        let m = reduced_tsm(&[0.0], &f, &[c(z)], s, &QuadratureRule::product(40)).unwrap();
        let x: f64 = 2.0 * z * s;
        let i0: f64 = (0..40)
            .map(|k| (x / 2.0).powi(2 * k) / (1..=k).map(|j| (j * j) as f64).product::<f64>())
            .sum();
        assert!((m.value - c((-(z * z + s * s)).exp() * i0)).norm() < 1e-14);
    }

    #[test]
    fn exact_moments_agree_with_product_rule() {
        let g = StepTwoGroup::quaternionic();
        let lambda = [0.3, -0.7, 0.5];
        let poly = &BiPolynomial::z(2, 0) * &BiPolynomial::zbar(2, 1);
        let f: Evaluable = TypeFunction::new(
            RadialSum::from_terms(vec![
                RadialTerm { c: c(1.0), a: c(-0.5), k: 0 },
                RadialTerm { c: Complex64::new(0.2, 0.1), a: c(-0.3), k: 2 },
            ]),
            poly,
        )
        .into();
        let z = [Complex64::new(0.3, -0.2), Complex64::new(0.1, 0.4)];
        let a = tsm(&g, &lambda, &f, &z, 1.1, &QuadratureRule::product(24)).unwrap();
        let b = tsm(&g, &lambda, &f, &z, 1.1, &QuadratureRule::exact(200)).unwrap();
        assert!((a.value - b.value).norm() < 1e-13, "{} vs {}", a.value, b.value);
    }

    #[test]
    fn exact_moments_reject_negative_powers() {
        let f: Evaluable = TypeFunction::radial(1, RadialSum::power(-2)).into();
        let h = StepTwoGroup::heisenberg(1);
        let e = tsm(&h, &[1.0], &f, &[c(0.3)], 1.0, &QuadratureRule::exact(50)).unwrap_err();
        assert!(matches!(e, TsmError::Unsupported(_)));
    }

    #[test]
    fn singular_node_is_reported() {
        // z = s puts the node w = z on the singularity of |u|^{-2}
        let f: Evaluable = TypeFunction::radial(1, RadialSum::power(-2)).into();
        let h = StepTwoGroup::heisenberg(1);
        let e = tsm(&h, &[1.0], &f, &[c(0.5)], 0.5, &QuadratureRule::product(4)).unwrap_err();
        assert!(matches!(e, TsmError::Singularity { node: 0, .. }));
    }

    #[test]
    fn heisenberg_vanishing_instance() {
        // e^{|z|^2/4} z |z|^{-2}
        let h = StepTwoGroup::heisenberg(1);
        let frame = reduce_group(&h, &[1.0]).unwrap();
        let kernel = vanishing_kernel(&frame, 1.0, &BiPolynomial::z(1, 0), 1).unwrap();
        let m = tsm(&h, &[1.0], &kernel.into(), &[c(0.3)], 1.0, &QuadratureRule::product(64)).unwrap();
        assert!(m.value.norm() < 1e-8, "{}", m.value);
    }

    #[test]
    fn frame_equivalence_on_quaternionic_group() {
        let g = StepTwoGroup::quaternionic();
        let frame = reduce_group(&g, &[0.8, -0.1, 0.6]).unwrap();
        let f: Evaluable = TypeFunction::new(
            RadialSum::gaussian(c(-0.5)),
            &BiPolynomial::z(2, 1) + &BiPolynomial::zbar(2, 0).scale(c(2.0)),
        )
        .into();
        let z = [Complex64::new(0.2, 0.5), Complex64::new(-0.4, 0.1)];
        let chk = frame_equivalence_check(&g, &frame, &f, &z, 0.9, &QuadratureRule::product(24)).unwrap();
        assert!(chk.residual < 1e-12, "{chk:?}");
        // the opaque path gives the same right side
        let opaque = Evaluable::opaque(2, {
            let inner = f.clone();
            move |u| inner.eval(u)
        });
        let chk2 = frame_equivalence_check(&g, &frame, &opaque, &z, 0.9, &QuadratureRule::product(24)).unwrap();
        assert!((chk2.rhs - chk.rhs).norm() < 1e-13);
        // conjugated closed form agrees with composition at a point
        if let Evaluable::Closed(t) = &f {
            let y = [Complex64::new(0.1, 0.2), Complex64::new(0.3, -0.6)];
            let ay = frame.transport_point(&y, Direction::Inverse);
            let p = &t.summands[0].1;
            assert!((conjugate_poly(p, &frame).eval(&y) - p.eval(&ay)).norm() < 1e-13);
        }
    }

    #[test]
    fn laguerre_values() {
        assert_eq!(laguerre(0, 3.0, 1.7), 1.0);
        assert_eq!(laguerre(1, 2.0, 0.0), 3.0);
        // L_2^a(x) = ((x^2) - 2(a+2)x + (a+1)(a+2)) / 2
        let (a, x) = (1.0, 0.8);
        assert!((laguerre(2, a, x) - (x * x - 2.0 * (a + 2.0) * x + (a + 1.0) * (a + 2.0)) / 2.0).abs() < 1e-14);
        let z = [Complex64::new(0.0, 0.0)];
        assert_eq!(laguerre_phi(0, 1, 2.0, &z), 1.0);
        assert_eq!(laguerre_phi(1, 3, 2.0, &[c(0.0); 3]), 3.0);
        assert!(laguerre_phi(4, 2, 1.0, &[c(30.0), c(0.0)]).abs() < 1e-80);
        for k in 0..6 {
            let r = laguerre_radial(k, 2, 1.3);
            let pt = [Complex64::new(0.7, 0.4), c(-0.5)];
            assert!((r.eval(norm(&pt)) - c(laguerre_phi(k, 2, 1.3, &pt))).norm() < 1e-13);
        }
    }

    #[test]
    fn convolution_basics() {
        let one: Evaluable = TypeFunction::radial(1, RadialSum::one()).into();
        let g = gaussian(1, -0.25);
        let rule = ConvolutionRule::Grid { points: 60 };
        let e = twisted_convolution(1.0, &one, &one, &[c(0.3)], &rule).unwrap_err();
        assert!(matches!(e, TsmError::Truncation(_)));
        let out = twisted_convolution(1.0, &g.compose(&DMatrix::identity(2, 2)), &g, &[c(0.0)], &rule).unwrap();
        // at z = 0: int e^{-|w|^2/2} dw = 2 pi
        assert!((out.value - c(std::f64::consts::TAU)).norm() < 1e-10);
    }

    #[test]
    fn boundary_probe_on_synthetic_functions() {
        let mu = 1.3;
        let grid: Vec<f64> = (0..1000).map(|i| 0.05 + 1.95 * i as f64 / 999.0).collect();
        let good = boundary_ode_probe_fn(mu, |r| Ok(c(r * (mu * r * r / 4.0).exp())), &grid, 8).unwrap();
        assert!(good.passed, "{}", good.max_residual);
        assert!((good.c_estimate - c(1.0)).norm() < 1e-14);
        let linear = boundary_ode_probe_fn(mu, |r| Ok(c(r)), &grid, 8).unwrap();
        assert!(!linear.passed);
        let zero = boundary_ode_probe_fn(mu, |_| Ok(c(0.0)), &grid, 8).unwrap();
        assert_eq!(zero.max_residual, 0.0);
    }
}
