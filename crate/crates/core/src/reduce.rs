//! Orthogonal reduction of `V_lambda = sum_j lambda_j U^(j)` to the block
//! form `[[0, -J], [J, 0]]`, `J = diag(mu_1 >= ... >= mu_n > 0)`.
//!
//! The eigen-pairs `+-i mu_j` are read off the 2x2 blocks of the real Schur
//! form, so the frame `A` is real orthogonal by construction. Columns are
//! arranged so that `V a_j = mu_j a_{n+j}` and `V a_{n+j} = -mu_j a_j`,
//! which is exactly `V A = A U_canon`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::coords::{apply_real, real_dot};
use crate::error::{Result, TsmError};
use crate::group::{StepTwoGroup, SPECTRAL_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedFrame {
    /// Empty when the frame was built from a bare matrix.
    pub lambda: Vec<f64>,
    pub v: DMatrix<f64>,
    pub a: DMatrix<f64>,
    pub mu: Vec<f64>,
    pub ucanon: DMatrix<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `z -> complexify(A^T x)`, i.e. `z_lambda`.
    Forward,
    /// `z -> complexify(A x)`, i.e. `z~_lambda`.
    Inverse,
}

/// `[[0, -J], [J, 0]]` with `J = diag(mu)`.
pub fn canonical_block(mu: &[f64]) -> DMatrix<f64> {
    let n = mu.len();
    let mut u = DMatrix::zeros(2 * n, 2 * n);
    for (j, &m) in mu.iter().enumerate() {
        u[(j, n + j)] = -m;
        u[(n + j, j)] = m;
    }
    u
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

impl ReducedFrame {
    pub fn n(&self) -> usize {
        self.mu.len()
    }

    pub fn orthogonality_residual(&self) -> f64 {
        let d = self.a.nrows();
        max_abs(&(self.a.transpose() * &self.a - DMatrix::<f64>::identity(d, d)))
    }

    /// `max |V A - A U_canon|`.
    pub fn conjugation_residual(&self) -> f64 {
        max_abs(&(&self.v * &self.a - &self.a * &self.ucanon))
    }

    /// `max |A^T V A - U_canon|`.
    pub fn congruence_residual(&self) -> f64 {
        max_abs(&(self.a.transpose() * &self.v * &self.a - &self.ucanon))
    }

    pub fn transport_point(&self, z: &[Complex64], direction: Direction) -> Vec<Complex64> {
        match direction {
            Direction::Forward => apply_real(&self.a.transpose(), z),
            Direction::Inverse => apply_real(&self.a, z),
        }
    }

    /// The identity frame for a canonical block, used to evaluate reduced
    /// means directly from `mu`.
    pub fn from_mu(mu: &[f64]) -> Self {
        let ucanon = canonical_block(mu);
        let d = 2 * mu.len();
        Self {
            lambda: Vec::new(),
            v: ucanon.clone(),
            a: DMatrix::identity(d, d),
            mu: mu.to_vec(),
            ucanon,
        }
    }
}

pub fn build_v(group: &StepTwoGroup, lambda: &[f64]) -> Result<DMatrix<f64>> {
    group.combination(lambda)
}

pub fn reduce_group(group: &StepTwoGroup, lambda: &[f64]) -> Result<ReducedFrame> {
    let v = build_v(group, lambda)?;
    let mut frame = reduce(&v)?;
    frame.lambda = lambda.to_vec();
    Ok(frame)
}

pub fn reduce(v: &DMatrix<f64>) -> Result<ReducedFrame> {
    let d = v.nrows();
    if d == 0 || d != v.ncols() || d % 2 != 0 {
        return Err(TsmError::Dimension(format!(
            "expected an even-dimensional square matrix, got {}x{}",
            v.nrows(),
            v.ncols()
        )));
    }
    let scale = max_abs(v).max(1.0);
    let skew = max_abs(&(v + v.transpose()));
    if skew > SPECTRAL_TOL * scale {
        return Err(TsmError::Invalid(format!(
            "matrix is not skew-symmetric (residual {skew:.3e})"
        )));
    }
    let min_sv = v
        .singular_values()
        .iter()
        .fold(f64::INFINITY, |a, &b| a.min(b));
    if min_sv <= SPECTRAL_TOL {
        return Err(TsmError::DegenerateForm(min_sv));
    }
    let n = d / 2;

    let schur = v
        .clone()
        .try_schur(f64::EPSILON, 10_000)
        .ok_or(TsmError::Numeric {
            achieved: f64::NAN,
            tolerance: SPECTRAL_TOL,
        })?;
    let (q, t) = schur.unpack();

    // (mu, leading vector) per 2x2 block, in Schur order
    let mut blocks: Vec<(f64, DVector<f64>)> = Vec::with_capacity(n);
    let mut k = 0;
    while k < d {
        let coupled = k + 1 < d && t[(k + 1, k)].abs() > f64::EPSILON * scale;
        if !coupled {
            // a real eigenvalue of a skew matrix is zero
            return Err(TsmError::DegenerateForm(t[(k, k)].abs()));
        }
        let (a, b, c, dd) = (t[(k, k)], t[(k, k + 1)], t[(k + 1, k)], t[(k + 1, k + 1)]);
        let half = 0.5 * (a - dd);
        let mu = (-(b * c) - half * half).max(0.0).sqrt();
        blocks.push((mu, q.column(k).into_owned()));
        k += 2;
    }
    // stable sort keeps Schur order among repeated mu
    blocks.sort_by(|x, y| y.0.partial_cmp(&x.0).unwrap_or(std::cmp::Ordering::Equal));

    let mut a = DMatrix::<f64>::zeros(d, d);
    let mut placed: Vec<DVector<f64>> = Vec::with_capacity(d);
    let mut mu = Vec::with_capacity(n);
    for (j, (m, x)) in blocks.into_iter().enumerate() {
        let mut vj = orthonormalize(x, &placed)?;
        if let Some(first) = vj.iter().find(|e| e.abs() > 1e-10) {
            if *first < 0.0 {
                vj = -vj;
            }
        }
        placed.push(vj.clone());
        let uj = orthonormalize(v * &vj / m, &placed)?;
        placed.push(uj.clone());
        a.set_column(j, &vj);
        a.set_column(n + j, &uj);
        mu.push(m);
    }

    let frame = ReducedFrame {
        lambda: Vec::new(),
        v: v.clone(),
        a,
        ucanon: canonical_block(&mu),
        mu,
    };
    let achieved = frame
        .orthogonality_residual()
        .max(frame.conjugation_residual());
    if achieved > SPECTRAL_TOL {
        return Err(TsmError::Numeric {
            achieved,
            tolerance: SPECTRAL_TOL,
        });
    }
    Ok(frame)
}

/// Two passes of Gram-Schmidt against `basis`, then normalization.
fn orthonormalize(mut x: DVector<f64>, basis: &[DVector<f64>]) -> Result<DVector<f64>> {
    for _ in 0..2 {
        for b in basis {
            let c = b.dot(&x);
            x -= b * c;
        }
    }
    let norm = x.norm();
    if norm < 1e-8 {
        return Err(TsmError::Numeric {
            achieved: norm,
            tolerance: 1e-8,
        });
    }
    Ok(x / norm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub residual: f64,
}

/// Compares `sum_j lambda_j Re(z . conj(U^(j) w))` with
/// `sum_j mu_j Im((z_lambda)_j conj((w_lambda)_j))`.
pub fn phase_identity_check(
    group: &StepTwoGroup,
    frame: &ReducedFrame,
    z: &[Complex64],
    w: &[Complex64],
) -> Result<PhaseCheck> {
    if frame.lambda.len() != group.m() {
        return Err(TsmError::Invalid(
            "frame was not built from this group's lambda".into(),
        ));
    }
    if z.len() != group.n() || w.len() != group.n() {
        return Err(TsmError::Dimension("z and w must have length n".into()));
    }
    let lhs: f64 = group
        .structure()
        .iter()
        .zip(&frame.lambda)
        .map(|(u, l)| l * real_dot(z, &apply_real(u, w)))
        .sum();
    let zl = frame.transport_point(z, Direction::Forward);
    let wl = frame.transport_point(w, Direction::Forward);
    let rhs: f64 = frame
        .mu
        .iter()
        .zip(zl.iter().zip(&wl))
        .map(|(m, (a, b))| m * (a * b.conj()).im)
        .sum();
    Ok(PhaseCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coords::norm;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_orthogonal(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        m.qr().q()
    }

    fn random_z(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn build_v_examples() {
        let h = StepTwoGroup::heisenberg(1);
        let v = build_v(&h, &[3.0]).unwrap();
        assert_eq!(v, DMatrix::from_row_slice(2, 2, &[0.0, -3.0, 3.0, 0.0]));
        let q = StepTwoGroup::quaternionic();
        let v = build_v(&q, &[3.0, 4.0, 0.0]).unwrap();
        let gram = v.transpose() * &v;
        assert!(max_abs(&(gram - DMatrix::identity(4, 4) * 25.0)) < 1e-12);
        assert_eq!(build_v(&q, &[1.0, 0.0, 0.0]).unwrap(), q.structure()[0]);
        assert_eq!(build_v(&q, &[0.0; 3]).unwrap_err(), TsmError::ZeroLambda);
    }

    #[test]
    fn canonical_matrix_is_its_own_frame() {
        let v = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]);
        let f = reduce(&v).unwrap();
        assert_eq!(f.mu, vec![1.0]);
        assert!(max_abs(&(&f.a - DMatrix::identity(2, 2))) < 1e-14);
        assert!(max_abs(&(&f.ucanon - &v)) < 1e-14);
    }

    #[test]
    fn quaternionic_mu_equals_lambda_norm() {
        let q = StepTwoGroup::quaternionic();
        let f = reduce_group(&q, &[3.0, 4.0, 0.0]).unwrap();
        for m in &f.mu {
            assert!((m - 5.0).abs() < 1e-10);
        }
        assert!(f.conjugation_residual() < 1e-10);
        assert!(f.congruence_residual() < 1e-10);
    }

    #[test]
    fn recovers_known_spectrum_under_rotation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = canonical_block(&[2.0, 1.0]);
        for _ in 0..20 {
            let qm = random_orthogonal(4, &mut rng);
            let v = &qm * &base * qm.transpose();
            let f = reduce(&v).unwrap();
            assert!((f.mu[0] - 2.0).abs() < 1e-10 && (f.mu[1] - 1.0).abs() < 1e-10);
            assert!(f.orthogonality_residual() < 1e-10);
            assert!(f.conjugation_residual() < 1e-10);
            assert!((f.a.determinant().abs() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = DMatrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        let v = &a - a.transpose();
        let f = reduce(&v).unwrap();
        let g = reduce(&(&v * 3.5)).unwrap();
        for (x, y) in f.mu.iter().zip(&g.mu) {
            assert!((3.5 * x - y).abs() < 1e-10);
        }
        assert!(g.conjugation_residual() < 1e-10);
    }

    #[test]
    fn singular_form_is_rejected() {
        let v = DMatrix::<f64>::zeros(2, 2);
        assert!(matches!(reduce(&v), Err(TsmError::DegenerateForm(_))));
        let mut w = canonical_block(&[1.0, 0.0]);
        w[(0, 2)] = -1.0;
        assert!(matches!(reduce(&w), Err(TsmError::DegenerateForm(_))));
    }

    #[test]
    fn deterministic_frames() {
        let q = StepTwoGroup::quaternionic();
        let a = reduce_group(&q, &[0.3, -0.2, 0.9]).unwrap();
        let b = reduce_group(&q, &[0.3, -0.2, 0.9]).unwrap();
        assert_eq!(a.a, b.a);
    }

    #[test]
    fn transport_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let id = ReducedFrame::from_mu(&[1.0, 2.0]);
        let z = random_z(2, &mut rng);
        assert_eq!(id.transport_point(&z, Direction::Forward), z);
        let q = StepTwoGroup::quaternionic();
        let f = reduce_group(&q, &[0.1, 0.7, -0.4]).unwrap();
        for _ in 0..20 {
            let z = random_z(2, &mut rng);
            let tz = f.transport_point(&z, Direction::Forward);
            assert!((norm(&tz) - norm(&z)).abs() < 1e-12);
            let back = f.transport_point(&tz, Direction::Inverse);
            assert!(norm(&back.iter().zip(&z).map(|(a, b)| a - b).collect::<Vec<_>>()) < 1e-12);
        }
    }

    #[test]
    fn phase_identity_examples() {
        let h = StepTwoGroup::heisenberg(1);
        let f = reduce_group(&h, &[1.0]).unwrap();
        let one = [Complex64::new(1.0, 0.0)];
        let i = [Complex64::new(0.0, 1.0)];
        let c = phase_identity_check(&h, &f, &one, &i).unwrap();
        assert!((c.lhs + 1.0).abs() < 1e-14 && (c.rhs + 1.0).abs() < 1e-14);
        let zero = [Complex64::new(0.0, 0.0)];
        let c = phase_identity_check(&h, &f, &zero, &i).unwrap();
        assert_eq!((c.lhs, c.rhs), (0.0, 0.0));

        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let q = StepTwoGroup::quaternionic();
        let f = reduce_group(&q, &[0.5, -1.5, 2.0]).unwrap();
        for _ in 0..1000 {
            let z = random_z(2, &mut rng);
            let w = random_z(2, &mut rng);
            assert!(phase_identity_check(&q, &f, &z, &w).unwrap().residual <= 1e-9);
        }
    }
}
