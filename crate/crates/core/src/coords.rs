//! Conversions between `C^n` and `R^{2n}`.
//!
//! The complexification convention is `z_l = x_l + i x_{n+l}`: the real
//! vector stores all real parts first, then all imaginary parts.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub fn realify(z: &[Complex64]) -> Vec<f64> {
    let n = z.len();
    let mut x = vec![0.0; 2 * n];
    for (l, zl) in z.iter().enumerate() {
        x[l] = zl.re;
        x[n + l] = zl.im;
    }
    x
}

pub fn complexify(x: &[f64]) -> Vec<Complex64> {
    debug_assert!(x.len() % 2 == 0);
    let n = x.len() / 2;
    (0..n).map(|l| Complex64::new(x[l], x[n + l])).collect()
}

/// `complexify(M * realify(z))`.
pub fn apply_real(matrix: &DMatrix<f64>, z: &[Complex64]) -> Vec<Complex64> {
    let x = DVector::from_vec(realify(z));
    let y = matrix * x;
    complexify(y.as_slice())
}

pub fn norm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Real inner product `<x, y>` of the realifications, i.e. `Re(z . conj(w))`.
pub fn real_dot(z: &[Complex64], w: &[Complex64]) -> f64 {
    z.iter().zip(w).map(|(a, b)| a.re * b.re + a.im * b.im).sum()
}

/// Parse a comma-separated list of complex numbers such as `"0.3,1-2i,i"`.
pub fn parse_complex_list(text: &str) -> Result<Vec<Complex64>, String> {
    text.split(',')
        .map(|tok| parse_complex(tok.trim()))
        .collect()
}

pub fn parse_complex(tok: &str) -> Result<Complex64, String> {
    let s: String = tok.chars().filter(|c| !c.is_whitespace()).collect();
    if s.is_empty() {
        return Err("empty complex literal".into());
    }
    if let Ok(re) = s.parse::<f64>() {
        return Ok(Complex64::new(re, 0.0));
    }
    let body = s
        .strip_suffix('i')
        .or_else(|| s.strip_suffix('j'))
        .ok_or_else(|| format!("cannot parse complex literal '{tok}'"))?;
    // split at the last sign that is not part of an exponent
    let bytes = body.as_bytes();
    let mut split = None;
    for idx in (1..bytes.len()).rev() {
        if (bytes[idx] == b'+' || bytes[idx] == b'-') && !matches!(bytes[idx - 1], b'e' | b'E') {
            split = Some(idx);
            break;
        }
    }
    let parse_im = |t: &str| -> Result<f64, String> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t
                .parse::<f64>()
                .map_err(|_| format!("cannot parse complex literal '{tok}'")),
        }
    };
    match split {
        Some(idx) => {
            let re = body[..idx]
                .parse::<f64>()
                .map_err(|_| format!("cannot parse complex literal '{tok}'"))?;
            Ok(Complex64::new(re, parse_im(&body[idx..])?))
        }
        None => Ok(Complex64::new(0.0, parse_im(body)?)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn realify_roundtrip() {
        let z = vec![Complex64::new(1.0, 2.0), Complex64::new(-3.0, 0.5)];
        assert_eq!(realify(&z), vec![1.0, -3.0, 2.0, 0.5]);
        assert_eq!(complexify(&realify(&z)), z);
    }

    #[test]
    fn parses_complex_literals() {
        let got = parse_complex_list("0.3, 1-2i, i, -i, 2.5e-1+1e-2i").unwrap();
        let want = [
            Complex64::new(0.3, 0.0),
            Complex64::new(1.0, -2.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(0.25, 0.01),
        ];
        assert_eq!(got, want);
        assert!(parse_complex("abc").is_err());
    }
}
