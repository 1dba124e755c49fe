//! One-dimensional least-squares polynomial surrogate.

use serde::{Deserialize, Serialize};

use crate::error::{AmError, Result};
use crate::scalar::Scalar;

/// Highest polynomial degree accepted by [`fit_polynomial`].
pub const MAX_DEGREE: usize = 12;

#[derive(Debug, Clone, PartialEq)]
pub struct PolynomialSurrogate<T> {
    degree: usize,
    /// Constant term first.
    coefficients: Vec<T>,
    fit_domain: (T, T),
    residual_rms: T,
}

/// A surrogate value, flagged when `s` falls outside the training interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub value: T,
    pub extrapolated: bool,
}

impl<T: Scalar> PolynomialSurrogate<T> {
    pub fn from_coefficients(
        coefficients: Vec<T>,
        fit_domain: (T, T),
        residual_rms: T,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(AmError::EmptyInput("polynomial coefficients"));
        }
        if !(residual_rms >= T::zero()) {
            return Err(AmError::InvalidConfig(
                "residual_rms must be non-negative".into(),
            ));
        }
        Ok(PolynomialSurrogate {
            degree: coefficients.len() - 1,
            coefficients,
            fit_domain,
            residual_rms,
        })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coefficients(&self) -> &[T] {
        &self.coefficients
    }

    pub fn fit_domain(&self) -> (T, T) {
        self.fit_domain
    }

    pub fn residual_rms(&self) -> T {
        self.residual_rms
    }

    /// Horner evaluation.
    pub fn value(&self, s: T) -> T {
        self.coefficients
            .iter()
            .rev()
            .fold(T::zero(), |acc, &c| acc * s + c)
    }

    pub fn evaluate(&self, s: T) -> Evaluation<T> {
        let (lo, hi) = self.fit_domain;
        Evaluation {
            value: self.value(s),
            extrapolated: s < lo || s > hi,
        }
    }
}

/// Least-squares polynomial of the given degree through `pairs`.
///
/// Solved with Householder QR on the Vandermonde matrix.
pub fn fit_polynomial<T: Scalar>(
    pairs: &[(T, T)],
    degree: usize,
) -> Result<PolynomialSurrogate<T>> {
    if degree > MAX_DEGREE {
        return Err(AmError::DegreeTooLarge {
            degree,
            cap: MAX_DEGREE,
        });
    }
    let cols = degree + 1;
    let rows = pairs.len();
    if rows < cols {
        return Err(AmError::TooFewPairs {
            pairs: rows,
            degree,
        });
    }
    let mut abscissae: Vec<T> = pairs.iter().map(|&(s, _)| s).collect();
    abscissae.sort_by(|a, b| a.partial_cmp(b).expect("finite abscissae"));
    abscissae.dedup();
    if abscissae.len() < cols {
        return Err(AmError::DegenerateAbscissae {
            distinct: abscissae.len(),
            degree,
        });
    }
    let fit_domain = (abscissae[0], abscissae[abscissae.len() - 1]);

    // column-major Vandermonde matrix
    let mut a = vec![T::zero(); rows * cols];
    for (i, &(s, _)) in pairs.iter().enumerate() {
        let mut power = T::one();
        for j in 0..cols {
            a[j * rows + i] = power;
            power = power * s;
        }
    }
    let mut b: Vec<T> = pairs.iter().map(|&(_, z)| z).collect();
    let coefficients = householder_least_squares(&mut a, &mut b, rows, cols)?;

    let sq: T = pairs
        .iter()
        .map(|&(s, z)| {
            let r = horner(&coefficients, s) - z;
            r * r
        })
        .sum();
    let residual_rms = (sq / T::from_index(rows)).sqrt();
    Ok(PolynomialSurrogate {
        degree,
        coefficients,
        fit_domain,
        residual_rms,
    })
}

fn horner<T: Scalar>(c: &[T], s: T) -> T {
    c.iter().rev().fold(T::zero(), |acc, &ci| acc * s + ci)
}

/// Minimizes `|A x - b|` for column-major `a` (`rows x cols`, rows >= cols).
/// Overwrites `a` with the factorization and `b` with `Q^T b`.
fn householder_least_squares<T: Scalar>(
    a: &mut [T],
    b: &mut [T],
    rows: usize,
    cols: usize,
) -> Result<Vec<T>> {
    let mut diag = vec![T::zero(); cols];
    let scale = a.iter().fold(T::zero(), |m, x| m.max(x.abs()));
    let tiny = scale * T::epsilon() * T::from_index(rows);
    for k in 0..cols {
        let (_, rest) = a.split_at_mut(k * rows);
        let (col, trailing) = rest.split_at_mut(rows);
        let x = &mut col[k..];
        let alpha = x.iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        if alpha <= tiny {
            return Err(AmError::DegenerateAbscissae {
                distinct: k,
                degree: cols - 1,
            });
        }
        let alpha = if x[0] > T::zero() { -alpha } else { alpha };
        // v = x - alpha e1, stored in place; |v|^2 = 2 alpha (alpha - x0)
        x[0] = x[0] - alpha;
        let vnorm2 = x.iter().fold(T::zero(), |acc, &v| acc + v * v);
        diag[k] = alpha;
        for j in 0..(cols - k - 1) {
            let c = &mut trailing[j * rows + k..(j + 1) * rows];
            reflect(x, c, vnorm2);
        }
        reflect(x, &mut b[k..], vnorm2);
    }
    // back substitution against R (diag on `diag`, strict upper in `a`)
    let mut coef = vec![T::zero(); cols];
    for k in (0..cols).rev() {
        let mut acc = b[k];
        for j in (k + 1)..cols {
            acc = acc - a[j * rows + k] * coef[j];
        }
        coef[k] = acc / diag[k];
    }
    Ok(coef)
}

#[inline]
fn reflect<T: Scalar>(v: &[T], target: &mut [T], vnorm2: T) {
    let d = v
        .iter()
        .zip(target.iter())
        .fold(T::zero(), |acc, (&vi, &ti)| acc + vi * ti);
    let f = (d + d) / vnorm2;
    for (t, &vi) in target.iter_mut().zip(v) {
        *t = *t - f * vi;
    }
}

/// Serialized form of a surrogate (one JSON-lines record).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateRecord {
    pub degree: usize,
    pub coefficients: Vec<f64>,
    pub fit_domain: [f64; 2],
    pub residual_rms: f64,
}

impl<T: Scalar> From<&PolynomialSurrogate<T>> for SurrogateRecord {
    fn from(p: &PolynomialSurrogate<T>) -> Self {
        SurrogateRecord {
            degree: p.degree,
            coefficients: p.coefficients.iter().map(|c| c.as_f64()).collect(),
            fit_domain: [p.fit_domain.0.as_f64(), p.fit_domain.1.as_f64()],
            residual_rms: p.residual_rms.as_f64(),
        }
    }
}

impl SurrogateRecord {
    pub fn to_surrogate<T: Scalar>(&self) -> Result<PolynomialSurrogate<T>> {
        if self.coefficients.len() != self.degree + 1 {
            return Err(AmError::InvalidConfig(format!(
                "degree {} needs {} coefficients, found {}",
                self.degree,
                self.degree + 1,
                self.coefficients.len()
            )));
        }
        PolynomialSurrogate::from_coefficients(
            self.coefficients.iter().map(|&c| T::lit(c)).collect(),
            (T::lit(self.fit_domain[0]), T::lit(self.fit_domain[1])),
            T::lit(self.residual_rms),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_xoshiro::Xoshiro256PlusPlus;

    #[test]
    fn exact_line() {
        let pairs = [(0.0f64, 1.0), (0.5, 2.0), (1.0, 3.0)];
        let p = fit_polynomial(&pairs, 1).unwrap();
        assert!((p.coefficients()[0] - 1.0).abs() < 1e-12);
        assert!((p.coefficients()[1] - 2.0).abs() < 1e-12);
        assert!(p.residual_rms() <= 1e-12);
        assert_eq!(p.fit_domain(), (0.0, 1.0));
    }

    #[test]
    fn exact_parabola() {
        let pairs: Vec<(f64, f64)> = [-1.0, -0.3, 0.2, 0.7, 1.5]
            .iter()
            .map(|&s| (s, s * s))
            .collect();
        let p = fit_polynomial(&pairs, 2).unwrap();
        for (c, e) in p.coefficients().iter().zip([0.0, 0.0, 1.0]) {
            assert!((c - e).abs() < 1e-10, "{c} vs {e}");
        }
    }

    #[test]
    fn noisy_cubic_recovers_leading_coefficient() {
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(7);
        let pairs: Vec<(f64, f64)> = (0..50)
            .map(|i| {
                let s = -1.0 + 2.0 * i as f64 / 49.0;
                // Box-Muller, sigma = 0.01
                let (u1, u2): (f64, f64) = (rng.gen(), rng.gen());
                let noise =
                    0.01 * (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos();
                (s, s.powi(3) + noise)
            })
            .collect();
        let p = fit_polynomial(&pairs, 3).unwrap();
        assert!((p.coefficients()[3] - 1.0).abs() <= 0.05);
    }

    #[test]
    fn evaluation_and_extrapolation_flag() {
        let p = PolynomialSurrogate::from_coefficients(vec![1.0, 2.0], (0.0, 1.0), 0.0).unwrap();
        assert_eq!(p.value(0.0), 1.0);
        let q = PolynomialSurrogate::from_coefficients(vec![0.0f64, 0.0, 1.0], (0.0, 1.0), 0.0)
            .unwrap();
        assert_eq!(q.value(0.5), 0.25);
        let mid = q.evaluate(0.5);
        assert!(mid.value.is_finite() && !mid.extrapolated);
        assert!(q.evaluate(1.5).extrapolated);
        assert!(q.evaluate(-0.1).extrapolated);
    }

    #[test]
    fn degenerate_inputs() {
        let same = [(0.3, 1.0), (0.3, 2.0), (0.3, 3.0)];
        assert!(matches!(
            fit_polynomial(&same, 1),
            Err(AmError::DegenerateAbscissae { .. })
        ));
        assert!(fit_polynomial(&same, 0).is_ok());
        let pairs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 0.0)).collect();
        assert!(matches!(
            fit_polynomial(&pairs, 13),
            Err(AmError::DegreeTooLarge { .. })
        ));
        assert!(matches!(
            fit_polynomial(&pairs[..3], 3),
            Err(AmError::TooFewPairs { .. })
        ));
    }

    #[test]
    fn works_in_f32() {
        let pairs: Vec<(f32, f32)> = (0..10)
            .map(|i| {
                let s = i as f32 / 9.0;
                (s, 2.0 * s - 0.5)
            })
            .collect();
        let p = fit_polynomial(&pairs, 1).unwrap();
        assert!((p.coefficients()[1] - 2.0).abs() < 1e-5);
    }

    #[test]
    fn record_roundtrip() {
        let p = fit_polynomial(&[(0.0, 1.0), (0.5, 0.2), (1.0, 3.0)], 2).unwrap();
        let rec = SurrogateRecord::from(&p);
        let back: PolynomialSurrogate<f64> = rec.to_surrogate().unwrap();
        assert_eq!(back, p);
    }
}
