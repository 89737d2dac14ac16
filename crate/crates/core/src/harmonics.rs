//! Bi-graded harmonic calculus: layer decomposition, the `zbar_j P` split,
//! `(p, q)`-projections, exact sphere moments and frame conjugation.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Result, TsmError};
use crate::poly::{BiPolynomial, Monomial};
use crate::radial::{RadialSum, TypeFunction};
use crate::reduce::ReducedFrame;

/// Harmonicity tolerance relative to the largest coefficient of `P`.
pub const HARMONIC_TOL: f64 = 1e-12;

/// `P = sum_k |z|^{2k} layers[k]`, `layers[k]` harmonic of bi-degree
/// `(p - k, q - k)`.
#[derive(Clone, Debug, PartialEq)]
pub struct HarmonicLayer {
    pub p: u32,
    pub q: u32,
    pub layers: Vec<BiPolynomial>,
}

impl HarmonicLayer {
    pub fn reconstruct(&self) -> BiPolynomial {
        let n = self.layers[0].n();
        self.layers
            .iter()
            .enumerate()
            .fold(BiPolynomial::zero(n), |acc, (k, h)| {
                &acc + &h.mul_norm_sq_pow(k as u32)
            })
    }

    pub fn max_laplacian(&self) -> f64 {
        self.layers
            .iter()
            .map(|h| h.laplacian().max_abs_coeff())
            .fold(0.0, f64::max)
    }
}

/// `Delta(|z|^{2i} H) = c(i, d) |z|^{2i-2} H` for harmonic `H` of total
/// degree `d` in `n` complex variables.
pub fn layer_constant(i: u32, d: u32, n: usize) -> f64 {
    4.0 * i as f64 * (i as f64 + d as f64 + n as f64 - 1.0)
}

pub fn harmonic_decompose(p: &BiPolynomial) -> Result<HarmonicLayer> {
    if p.is_zero() {
        return Ok(HarmonicLayer {
            p: 0,
            q: 0,
            layers: vec![p.clone()],
        });
    }
    let (dp, dq) = p.bidegree().ok_or(TsmError::NotHomogeneous)?;
    harmonic_decompose_pq(p, dp, dq)
}

/// As `harmonic_decompose`, with the bi-degree given (useful for zero input).
pub fn harmonic_decompose_pq(p: &BiPolynomial, dp: u32, dq: u32) -> Result<HarmonicLayer> {
    if !p.is_zero() && p.bidegree() != Some((dp, dq)) {
        return Err(TsmError::NotHomogeneous);
    }
    let n = p.n();
    let top = dp.min(dq);
    let mut layers = vec![BiPolynomial::zero(n); top as usize + 1];
    let mut rest = p.clone();
    for l in (0..=top).rev() {
        if rest.is_zero() {
            break;
        }
        let d = dp + dq - 2 * l;
        let mut lap = rest.clone();
        let mut denom = 1.0;
        for i in 1..=l {
            lap = lap.laplacian();
            denom *= layer_constant(i, d, n);
        }
        let h = lap.scale_real(1.0 / denom);
        rest = &rest - &h.mul_norm_sq_pow(l);
        layers[l as usize] = h;
    }
    Ok(HarmonicLayer {
        p: dp,
        q: dq,
        layers,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    /// Multiply by `zbar_j`; the derivative is `dP/dz_j`.
    Zbar,
    /// Multiply by `z_j`; the derivative is `dP/dzbar_j`.
    Z,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub p0: BiPolynomial,
    /// `n + p + q - 1`; zero only for `n = 1`, `P` constant, where the
    /// derivative term vanishes.
    pub gamma_denominator: usize,
}

impl Split {
    pub fn gamma(&self) -> Option<f64> {
        (self.gamma_denominator > 0).then(|| 1.0 / self.gamma_denominator as f64)
    }
}

fn check_harmonic(p: &BiPolynomial) -> Result<()> {
    let lap = p.laplacian().max_abs_coeff();
    if lap > HARMONIC_TOL * p.max_abs_coeff().max(1.0) {
        return Err(TsmError::NotHarmonic(lap));
    }
    Ok(())
}

/// `zbar_j P = P0 + gamma_{p,q} |z|^2 dP/dz_j` (or the mirrored `z_j` form),
/// with `P0` harmonic.
pub fn corollary_split(p: &BiPolynomial, j: usize, side: Side) -> Result<Split> {
    if j >= p.n() {
        return Err(TsmError::Dimension(format!("index {j} out of range for n = {}", p.n())));
    }
    let (dp, dq) = if p.is_zero() {
        (0, 0)
    } else {
        p.bidegree().ok_or(TsmError::NotHomogeneous)?
    };
    check_harmonic(p)?;
    let den = p.n() + dp as usize + dq as usize - 1;
    let (shifted, deriv) = match side {
        Side::Zbar => (p.mul_zbar(j), p.d_z(j)),
        Side::Z => (p.mul_z(j), p.d_zbar(j)),
    };
    let p0 = if deriv.is_zero() {
        shifted
    } else {
        &shifted - &deriv.mul_norm_sq_pow(1).scale_real(1.0 / den as f64)
    };
    Ok(Split {
        p0,
        gamma_denominator: den,
    })
}

/// The `(p, q)` component of a type function: each polynomial factor is
/// split into bi-homogeneous parts, decomposed into layers, and the layer
/// in `H_{p,q}` is kept with `|z|^{2k}` moved into the radial factor.
pub fn project_pq(f: &TypeFunction, p: u32, q: u32) -> Result<TypeFunction> {
    let n = f.n();
    let mut out = TypeFunction::zero(n);
    for (radial, poly) in &f.summands {
        for ((dp, dq), part) in poly.homogeneous_parts() {
            if dp < p || dq < q || dp - p != dq - q {
                continue;
            }
            let k = dp - p;
            let layers = harmonic_decompose_pq(&part, dp, dq)?;
            let h = &layers.layers[k as usize];
            if h.is_zero() {
                continue;
            }
            out = out.add(&TypeFunction::new(radial.mul_power(2 * k as i32), h.clone()));
        }
    }
    Ok(out)
}

pub fn project_poly(p: &BiPolynomial, dp: u32, dq: u32) -> Result<TypeFunction> {
    project_pq(&TypeFunction::polynomial(p.clone()), dp, dq)
}

/// `int_{S^{2n-1}} w^alpha wbar^beta dsigma` for the normalized measure.
pub fn sphere_moment(alpha: &[u32], beta: &[u32], n: usize) -> f64 {
    assert!(alpha.len() == n && beta.len() == n, "multi-index length must be n");
    if alpha != beta {
        return 0.0;
    }
    let total: u64 = alpha.iter().map(|&a| a as u64).sum();
    // (n-1)! alpha! / (n-1+|alpha|)!, accumulated as a ratio to stay in range
    let mut value = 1.0;
    let mut denom_index = n as u64 - 1;
    for &a in alpha {
        for i in 1..=a as u64 {
            denom_index += 1;
            value *= i as f64 / denom_index as f64;
        }
    }
    debug_assert_eq!(denom_index, n as u64 - 1 + total);
    value
}

/// Normalized sphere average of a polynomial.
pub fn sphere_integral(p: &BiPolynomial) -> Complex64 {
    p.terms()
        .map(|(m, c)| c * sphere_moment(m.alpha(), m.beta(), p.n()))
        .sum()
}

/// `<P, Q>` on the sphere: the average of `P conj(Q)`.
pub fn sphere_inner(p: &BiPolynomial, q: &BiPolynomial) -> Complex64 {
    sphere_integral(&(p * &q.conjugate()))
}

/// Coefficients `(a, b)` with `z_l = sum_k a[l][k] w_k + b[l][k] wbar_k`
/// when `z = complexify(M y)` and `w = complexify(y)`.
pub fn matrix_substitution(m: &DMatrix<f64>) -> (Vec<Vec<Complex64>>, Vec<Vec<Complex64>>) {
    let n = m.nrows() / 2;
    let i = Complex64::new(0.0, 1.0);
    let mut a = vec![vec![Complex64::default(); n]; n];
    let mut b = vec![vec![Complex64::default(); n]; n];
    for l in 0..n {
        for k in 0..n {
            // coefficient of Re(w_k) and Im(w_k) in z_l
            let re = Complex64::new(m[(l, k)], m[(n + l, k)]);
            let im = Complex64::new(m[(l, n + k)], m[(n + l, n + k)]);
            a[l][k] = (re - i * im) / 2.0;
            b[l][k] = (re + i * im) / 2.0;
        }
    }
    (a, b)
}

/// `y -> P(M y)` for a real `2n x 2n` matrix `M`.
pub fn compose_real(p: &BiPolynomial, m: &DMatrix<f64>) -> BiPolynomial {
    let (a, b) = matrix_substitution(m);
    p.linear_substitute(&a, &b)
}

/// `P_lambda(y) = P(A y)`, so that `P(x) = P_lambda(A^T x)`.
pub fn conjugate_poly(p: &BiPolynomial, frame: &ReducedFrame) -> BiPolynomial {
    compose_real(p, &frame.a)
}

/// The inverse of `conjugate_poly`: `x -> P(A^T x)`.
pub fn pull_back_poly(p: &BiPolynomial, frame: &ReducedFrame) -> BiPolynomial {
    compose_real(p, &frame.a.transpose())
}

/// Whether `P_lambda` is harmonic and bi-homogeneous of degree `(p, q)`.
pub fn is_hlambda_pq(poly: &BiPolynomial, p: u32, q: u32, frame: &ReducedFrame) -> bool {
    let pl = conjugate_poly(poly, frame);
    if pl.is_zero() {
        return true;
    }
    pl.bidegree() == Some((p, q))
        && pl.laplacian().max_abs_coeff() <= HARMONIC_TOL * pl.max_abs_coeff().max(1.0)
}

/// A basis of `H_{p,q}` obtained by projecting every monomial of bi-degree
/// `(p, q)`; the result spans the space but is not linearly independent.
pub fn harmonic_projections_of_monomials(n: usize, p: u32, q: u32) -> Result<Vec<BiPolynomial>> {
    crate::poly::monomials_of_bidegree(n, p, q)
        .into_iter()
        .map(|m| {
            let poly = BiPolynomial::from_terms(n, [(m, Complex64::new(1.0, 0.0))]);
            Ok(harmonic_decompose_pq(&poly, p, q)?.layers.swap_remove(0))
        })
        .collect()
}

/// Groups the summands of a type function by harmonic component. Mostly
/// a diagnostic: the keys present are the `(p, q)` with nonzero projection.
pub fn harmonic_components(f: &TypeFunction) -> Result<BTreeMap<(u32, u32), TypeFunction>> {
    let mut keys = Vec::new();
    for (_, poly) in &f.summands {
        for (dp, dq) in poly.homogeneous_parts().keys() {
            for k in 0..=(*dp).min(*dq) {
                keys.push((dp - k, dq - k));
            }
        }
    }
    keys.sort();
    keys.dedup();
    let mut out = BTreeMap::new();
    for (p, q) in keys {
        let part = project_pq(f, p, q)?;
        if !part.is_zero() {
            out.insert((p, q), part);
        }
    }
    Ok(out)
}

/// Radial factor of a projection onto `H_{0,0}`: the constant-layer
/// coefficient as a `RadialSum`.
pub fn radial_part(f: &TypeFunction) -> Result<RadialSum> {
    let proj = project_pq(f, 0, 0)?;
    let one = Monomial::one(f.n());
    let mut out = RadialSum::zero();
    for (r, p) in &proj.summands {
        for (m, c) in p.terms() {
            if *m == one {
                out = out.add(&r.scale(*c));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::StepTwoGroup;
    use crate::reduce::reduce_group;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    fn z(n: usize, j: usize) -> BiPolynomial {
        BiPolynomial::z(n, j)
    }

    fn zb(n: usize, j: usize) -> BiPolynomial {
        BiPolynomial::zbar(n, j)
    }

    #[test]
    fn decompose_norm_sq() {
        for n in 1..=3 {
            let layers = harmonic_decompose(&BiPolynomial::norm_sq(n)).unwrap();
            assert!(layers.layers[0].is_zero());
            assert_eq!(layers.layers[1], BiPolynomial::one(n));
        }
    }

    #[test]
    fn decompose_z1_zbar1() {
        let p = &z(2, 0) * &zb(2, 0);
        let layers = harmonic_decompose(&p).unwrap();
        let expected = &p - &BiPolynomial::norm_sq(2).scale_real(0.5);
        assert!((&layers.layers[0] - &expected).max_abs_coeff() < 1e-15);
        assert_eq!(layers.layers[1], BiPolynomial::constant(2, c(0.5)));
    }

    #[test]
    fn harmonic_input_is_its_own_top_layer() {
        let p = &(&z(2, 0) * &z(2, 0)) * &zb(2, 1);
        let layers = harmonic_decompose(&p).unwrap();
        assert_eq!(layers.layers[0], p);
        assert!(layers.layers[1..].iter().all(BiPolynomial::is_zero));
    }

    #[test]
    fn decompose_rejects_mixed_degrees() {
        let p = &z(2, 0) + &BiPolynomial::one(2);
        assert_eq!(harmonic_decompose(&p).unwrap_err(), TsmError::NotHomogeneous);
    }

    #[test]
    fn layer_constants_against_direct_laplacian() {
        for n in 1..=3 {
            let h = &z(n, 0) * &zb(n, n - 1);
            let h = if n == 1 { z(1, 0) } else { h };
            let d = h.total_degree().unwrap();
            assert!(h.laplacian().is_zero());
            for i in 1..=3 {
                let lhs = h.mul_norm_sq_pow(i).laplacian();
                let rhs = h.mul_norm_sq_pow(i - 1).scale_real(layer_constant(i, d, n));
                assert!((&lhs - &rhs).max_abs_coeff() < 1e-12);
            }
        }
    }

    #[test]
    fn split_examples() {
        let s = corollary_split(&z(2, 0), 0, Side::Zbar).unwrap();
        assert_eq!(s.gamma(), Some(0.5));
        let expected = &(&z(2, 0) * &zb(2, 0)) - &BiPolynomial::norm_sq(2).scale_real(0.5);
        assert!((&s.p0 - &expected).max_abs_coeff() < 1e-15);

        let s = corollary_split(&BiPolynomial::one(2), 0, Side::Zbar).unwrap();
        assert_eq!(s.p0, zb(2, 0));

        let p = zb(2, 1);
        let s = corollary_split(&p, 0, Side::Z).unwrap();
        let oracle = harmonic_decompose(&(&z(2, 0) * &p)).unwrap();
        assert_eq!(s.p0, oracle.layers[0]);
        let rebuilt = &s.p0 + &p.d_zbar(0).mul_norm_sq_pow(1).scale_real(s.gamma().unwrap());
        assert!((&rebuilt - &p.mul_z(0)).max_abs_coeff() <= 1e-12);

        let s = corollary_split(&BiPolynomial::one(1), 0, Side::Zbar).unwrap();
        assert_eq!(s.gamma(), None);
        assert_eq!(s.p0, zb(1, 0));
    }

    #[test]
    fn split_rejects_non_harmonic() {
        let p = &z(2, 0) * &zb(2, 0);
        assert!(matches!(corollary_split(&p, 0, Side::Zbar), Err(TsmError::NotHarmonic(_))));
    }

    #[test]
    fn projection_examples() {
        let f = TypeFunction::polynomial(&z(2, 0) * &zb(2, 0));
        let p11 = project_pq(&f, 1, 1).unwrap();
        let expected = TypeFunction::polynomial(
            &(&z(2, 0) * &zb(2, 0)) - &BiPolynomial::norm_sq(2).scale_real(0.5),
        );
        assert!(p11.add(&expected.scale(c(-1.0))).max_abs_coeff() < 1e-15);
        let p00 = project_pq(&f, 0, 0).unwrap();
        let expected = TypeFunction::radial(2, RadialSum::power(2).scale(c(0.5)));
        assert!(p00.add(&expected.scale(c(-1.0))).is_zero());

        let g = TypeFunction::new(RadialSum::gaussian(c(-0.3)), &z(2, 0) * &zb(2, 1));
        assert_eq!(project_pq(&g, 1, 1).unwrap(), g.simplify());
        assert!(project_pq(&g, 0, 0).unwrap().is_zero());
        let once = project_pq(&f, 1, 1).unwrap();
        assert_eq!(project_pq(&once, 1, 1).unwrap(), once);
    }

    #[test]
    fn sphere_moment_examples() {
        assert_eq!(sphere_moment(&[1, 0], &[0, 1], 2), 0.0);
        assert!((sphere_moment(&[1, 0], &[1, 0], 2) - 0.5).abs() < 1e-15);
        assert!((sphere_moment(&[2, 0], &[2, 0], 2) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sphere_moment(&[0], &[0], 1), 1.0);
        // sum_j |w_j|^2 = 1 on the sphere
        assert!((sphere_integral(&BiPolynomial::norm_sq(3)) - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn identity_frame_conjugation_is_noop() {
        let frame = ReducedFrame::from_mu(&[1.0, 1.0]);
        let p = &(&z(2, 0) * &zb(2, 1)) + &z(2, 1).scale(Complex64::new(0.0, 2.0));
        assert!((&conjugate_poly(&p, &frame) - &p).max_abs_coeff() < 1e-15);
    }

    #[test]
    fn conjugation_agrees_with_pointwise_evaluation() {
        let g = StepTwoGroup::quaternionic();
        let frame = reduce_group(&g, &[0.2, 0.9, -0.4]).unwrap();
        let p = &(&z(2, 0) * &z(2, 1)) * &zb(2, 0);
        let pl = conjugate_poly(&p, &frame);
        let y = [Complex64::new(0.3, -0.8), Complex64::new(0.5, 0.1)];
        let ay = frame.transport_point(&y, crate::reduce::Direction::Inverse);
        assert!((pl.eval(&y) - p.eval(&ay)).norm() < 1e-13);
        assert!((&pull_back_poly(&pl, &frame) - &p).max_abs_coeff() < 1e-13);
        assert_eq!(pl.total_degree(), p.total_degree());
        assert!(pl.laplacian().max_abs_coeff() > 1e-3 || p.laplacian().max_abs_coeff() < 1e-12);
    }

    #[test]
    fn conjugation_preserves_harmonicity() {
        let g = StepTwoGroup::quaternionic();
        let frame = reduce_group(&g, &[1.0, -0.3, 0.5]).unwrap();
        let p = &(&z(2, 0) * &z(2, 0)) * &zb(2, 1);
        let pl = conjugate_poly(&p, &frame);
        assert!(pl.laplacian().max_abs_coeff() < 1e-12);
        // H-type frames commute with the complex structure up to the
        // block arrangement, so only total degree is guaranteed in general
        assert_eq!(pl.total_degree(), Some(3));
        assert!(is_hlambda_pq(&p, 2, 1, &ReducedFrame::from_mu(&[1.0, 1.0])));
    }

    #[test]
    fn distinct_layers_are_orthogonal() {
        let n = 2;
        let h11 = harmonic_projections_of_monomials(n, 1, 1).unwrap();
        let h20 = harmonic_projections_of_monomials(n, 2, 0).unwrap();
        let h00 = harmonic_projections_of_monomials(n, 0, 0).unwrap();
        for a in &h11 {
            for b in h20.iter().chain(&h00) {
                assert!(sphere_inner(a, b).norm() < 1e-12);
            }
        }
    }
}
