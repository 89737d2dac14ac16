//! Quadrature on `S^{2n-1}` and deterministic parallel summation.
//!
//! The product rule peels one polar angle at a time: writing
//! `x = (t, sqrt(1 - t^2) y)` with `y` on the next smaller sphere, the
//! measure in `t` is `(1 - t^2)^{(D-3)/2} dt`, so each level uses Gauss-Jacobi
//! nodes for that weight. The last circle uses `2K` equispaced azimuths.
//! With `K` points per level every polynomial of degree `<= 2K - 1` is
//! integrated exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coords::complexify;
use crate::error::{Result, TsmError};

/// Nodes per parallel work item. Fixed so that sums do not depend on the
/// thread count.
pub const CHUNK: usize = 4096;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QuadKind {
    ProductAngles,
    MonteCarlo,
    ExactMoments,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuadratureRule {
    pub kind: QuadKind,
    /// Points per angle level, MC sample count, or series truncation order.
    pub order: usize,
    pub seed: u64,
}

impl QuadratureRule {
    pub fn product(order: usize) -> Self {
        Self {
            kind: QuadKind::ProductAngles,
            order,
            seed: 0,
        }
    }

    pub fn monte_carlo(samples: usize, seed: u64) -> Self {
        Self {
            kind: QuadKind::MonteCarlo,
            order: samples,
            seed,
        }
    }

    pub fn exact(order: usize) -> Self {
        Self {
            kind: QuadKind::ExactMoments,
            order,
            seed: 0,
        }
    }

    /// Parses `KIND:ORDER` with kind `angles`, `mc` or `exact`.
    pub fn parse(spec: &str, seed: u64) -> Result<Self> {
        let (kind, order) = spec
            .split_once(':')
            .ok_or_else(|| TsmError::Invalid(format!("quadrature spec '{spec}' is not KIND:ORDER")))?;
        let order: usize = order
            .trim()
            .parse()
            .map_err(|_| TsmError::Invalid(format!("bad quadrature order in '{spec}'")))?;
        if order == 0 {
            return Err(TsmError::Invalid("quadrature order must be positive".into()));
        }
        let kind = match kind.trim() {
            "angles" | "product" => QuadKind::ProductAngles,
            "mc" => QuadKind::MonteCarlo,
            "exact" => QuadKind::ExactMoments,
            other => return Err(TsmError::Invalid(format!("unknown quadrature kind '{other}'"))),
        };
        Ok(Self { kind, order, seed })
    }
}

/// Nodes on the unit sphere in realified coordinates, with weights summing
/// to one.
#[derive(Clone, Debug)]
pub struct SphereRule {
    pub n: usize,
    points: Vec<f64>,
    pub weights: Vec<f64>,
}

impl SphereRule {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Realified unit vector of node `i`.
    pub fn point(&self, i: usize) -> &[f64] {
        let d = 2 * self.n;
        &self.points[i * d..(i + 1) * d]
    }

    pub fn complex_point(&self, i: usize) -> Vec<Complex64> {
        complexify(self.point(i))
    }
}

/// Gauss rule for `(1 - t^2)^a` on `[-1, 1]` (Golub-Welsch), weights
/// normalized to sum to one, nodes ascending.
pub fn gauss_gegenbauer(k: usize, a: f64) -> (Vec<f64>, Vec<f64>) {
    let mut jac = DMatrix::<f64>::zeros(k, k);
    for i in 1..k {
        let i_f = i as f64;
        let beta = i_f * (i_f + 2.0 * a) / ((2.0 * i_f + 2.0 * a - 1.0) * (2.0 * i_f + 2.0 * a + 1.0));
        jac[(i, i - 1)] = beta.sqrt();
        jac[(i - 1, i)] = beta.sqrt();
    }
    let eig = SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..k)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
        .collect();
    pairs.sort_by(|x, y| x.0.total_cmp(&y.0));
    // symmetrize against round-off
    for i in 0..k / 2 {
        let j = k - 1 - i;
        let t = 0.5 * (pairs[j].0 - pairs[i].0);
        let w = 0.5 * (pairs[i].1 + pairs[j].1);
        pairs[i] = (-t, w);
        pairs[j] = (t, w);
    }
    if k % 2 == 1 {
        pairs[k / 2].0 = 0.0;
    }
    let total: f64 = pairs.iter().map(|p| p.1).sum();
    pairs.into_iter().map(|(t, w)| (t, w / total)).unzip()
}

fn build_product(n: usize, k: usize) -> SphereRule {
    let d = 2 * n;
    // start on the circle
    let m = 2 * k;
    let mut pts: Vec<Vec<f64>> = (0..m)
        .map(|j| {
            let phi = std::f64::consts::TAU * j as f64 / m as f64;
            vec![phi.cos(), phi.sin()]
        })
        .collect();
    let mut wts: Vec<f64> = vec![1.0 / m as f64; m];
    // lift to S^{dim-1}, dim = 3..=d
    for dim in 3..=d {
        let (t, w) = gauss_gegenbauer(k, (dim as f64 - 3.0) / 2.0);
        let mut next_pts = Vec::with_capacity(pts.len() * k);
        let mut next_wts = Vec::with_capacity(pts.len() * k);
        for (ti, wi) in t.iter().zip(&w) {
            let s = (1.0 - ti * ti).max(0.0).sqrt();
            for (p, pw) in pts.iter().zip(&wts) {
                let mut q = Vec::with_capacity(dim);
                q.push(*ti);
                q.extend(p.iter().map(|x| s * x));
                next_pts.push(q);
                next_wts.push(wi * pw);
            }
        }
        pts = next_pts;
        wts = next_wts;
    }
    SphereRule {
        n,
        points: pts.into_iter().flatten().collect(),
        weights: wts,
    }
}

fn build_monte_carlo(n: usize, samples: usize, seed: u64) -> SphereRule {
    let d = 2 * n;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(samples * d);
    let mut buf = vec![0.0; d];
    for _ in 0..samples {
        loop {
            for b in buf.iter_mut() {
                *b = StandardNormal.sample(&mut rng);
            }
            let r = buf.iter().map(|x| x * x).sum::<f64>().sqrt();
            if r > 1e-300 {
                points.extend(buf.iter().map(|x| x / r));
                break;
            }
        }
    }
    SphereRule {
        n,
        points,
        weights: vec![1.0 / samples as f64; samples],
    }
}

type RuleKey = (QuadKind, usize, usize, u64);

fn cache() -> &'static Mutex<HashMap<RuleKey, Arc<SphereRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<SphereRule>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// Node set for a sampling rule on `S^{2n-1}`; cached per
/// `(kind, n, order, seed)`.
pub fn sphere_rule(n: usize, rule: &QuadratureRule) -> Result<Arc<SphereRule>> {
    if n == 0 {
        return Err(TsmError::Dimension("n must be positive".into()));
    }
    let key = match rule.kind {
        QuadKind::ProductAngles => (rule.kind, n, rule.order, 0),
        QuadKind::MonteCarlo => (rule.kind, n, rule.order, rule.seed),
        QuadKind::ExactMoments => {
            return Err(TsmError::Unsupported(
                "exact moments do not use a node set".into(),
            ))
        }
    };
    if let Some(r) = cache().lock().expect("rule cache").get(&key) {
        return Ok(r.clone());
    }
    let built = Arc::new(match rule.kind {
        QuadKind::ProductAngles => build_product(n, rule.order),
        _ => build_monte_carlo(n, rule.order, rule.seed),
    });
    cache()
        .lock()
        .expect("rule cache")
        .insert(key, built.clone());
    Ok(built)
}

/// Recursive pairwise summation.
pub fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 32 {
        return v.iter().sum();
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Sums `term(i)` over `0..len` in fixed chunks, pairwise within and
/// across chunks. The result is identical for any thread count.
pub fn chunked_sum<F>(len: usize, term: F) -> Result<Complex64>
where
    F: Fn(usize) -> Result<Complex64> + Sync,
{
    let chunks = len.div_ceil(CHUNK);
    let partial: Vec<Complex64> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let vals: Result<Vec<Complex64>> = (lo..hi).map(&term).collect();
            vals.map(|v| pairwise_sum(&v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(pairwise_sum(&partial))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Estimate {
    pub value: Complex64,
    /// Standard error for MC; for the product rule, the change against the
    /// rule of half the order.
    pub err_estimate: f64,
}

/// Weighted sum of `f` over the nodes of `rule`; `f` receives the node index
/// and the realified unit vector. For equal-weight rules the standard error
/// of the mean is returned as well.
pub fn integrate_rule<F>(rule: &SphereRule, f: F) -> Result<(Complex64, Option<f64>)>
where
    F: Fn(usize, &[f64]) -> Result<Complex64> + Sync,
{
    let len = rule.len();
    let partial: Vec<(Complex64, Complex64)> = (0..len.div_ceil(CHUNK))
        .into_par_iter()
        .map(|c| {
            let lo = c * CHUNK;
            let hi = (lo + CHUNK).min(len);
            let mut vals = Vec::with_capacity(hi - lo);
            let mut squares = Vec::with_capacity(hi - lo);
            for i in lo..hi {
                let v = f(i, rule.point(i))?;
                vals.push(v * rule.weights[i]);
                squares.push(Complex64::new(v.norm_sqr() * rule.weights[i], 0.0));
            }
            Ok((pairwise_sum(&vals), pairwise_sum(&squares)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (sums, squares): (Vec<Complex64>, Vec<Complex64>) = partial.into_iter().unzip();
    let value = pairwise_sum(&sums);
    let uniform = rule.weights.first().is_some_and(|w0| rule.weights.iter().all(|w| w == w0));
    if !uniform || len < 2 {
        return Ok((value, None));
    }
    let n = len as f64;
    let second = pairwise_sum(&squares).re;
    let var = ((second - value.norm_sqr()) * n / (n - 1.0)).max(0.0);
    Ok((value, Some((var / n).sqrt())))
}

/// Average of a function of the unit vector over `S^{2n-1}`.
pub fn sphere_average<F>(n: usize, rule: &QuadratureRule, f: F) -> Result<Estimate>
where
    F: Fn(&[f64]) -> Result<Complex64> + Sync,
{
    match rule.kind {
        QuadKind::ProductAngles => {
            let fine = sphere_rule(n, rule)?;
            let (value, _) = integrate_rule(&fine, |_, x| f(x))?;
            let half = QuadratureRule::product((rule.order / 2).max(1));
            let coarse = sphere_rule(n, &half)?;
            let (coarse_value, _) = integrate_rule(&coarse, |_, x| f(x))?;
            Ok(Estimate {
                value,
                err_estimate: (value - coarse_value).norm(),
            })
        }
        QuadKind::MonteCarlo => {
            let nodes = sphere_rule(n, rule)?;
            let (value, se) = integrate_rule(&nodes, |_, x| f(x))?;
            Ok(Estimate {
                value,
                err_estimate: se.unwrap_or(f64::INFINITY),
            })
        }
        QuadKind::ExactMoments => Err(TsmError::Unsupported(
            "exact moments need a closed-form integrand".into(),
        )),
    }
}

/// Reads `TSMKIT_THREADS` and sizes the global pool accordingly. Returns
/// the thread count in effect.
pub fn init_threads_from_env() -> usize {
    if let Some(n) = std::env::var("TSMKIT_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
    {
        // a pool may already exist; keep it in that case
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    rayon::current_num_threads()
}
