//! Scalar functions over the hypercube, with their gradients.

use std::fmt;
use std::str::FromStr;

use crate::error::{AmError, Result};
use crate::scalar::Scalar;

/// Central finite-difference step for black-box evaluators.
pub const FD_STEP: f64 = 1e-5;

/// A scalar function `f : [-1,1]^n -> R` that can report its gradient.
pub trait Objective<T: Scalar>: Sync {
    /// Fixed input dimension, or `None` when the function accepts any.
    fn dimension(&self) -> Option<usize>;

    fn value(&self, x: &[T]) -> T;

    fn gradient(&self, x: &[T]) -> Vec<T>;

    /// Value and gradient, rejecting non-finite output.
    fn evaluate(&self, x: &[T]) -> Result<(T, Vec<T>)> {
        if let Some(n) = self.dimension() {
            if n != x.len() {
                return Err(AmError::DimensionMismatch {
                    expected: n,
                    found: x.len(),
                });
            }
        }
        let value = self.value(x);
        let gradient = self.gradient(x);
        if !value.is_finite() || gradient.iter().any(|g| !g.is_finite()) {
            return Err(AmError::Evaluation {
                point: x.iter().map(|c| c.as_f64()).collect(),
            });
        }
        Ok((value, gradient))
    }
}

/// Coefficients of the cubic terms of the synthetic 5-D function `f3`.
pub const F3_CUBIC: [f64; 5] = [1.0, 0.8, 0.6, 0.4, 0.2];
/// Coefficients of the linear terms of the synthetic 5-D function `f3`.
pub const F3_LINEAR: [f64; 5] = [0.5, 0.4, 0.3, 0.2, 0.1];

/// Built-in test functions with analytic gradients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    /// `exp(y - x^2)` on `[-1,1]^2`.
    F1,
    /// `x^3 + y^3 + 0.2x + 0.6y` on `[-1,1]^2`.
    F2,
    /// `sum_i c_i x_i^3 + d_i x_i` on `[-1,1]^5` with [`F3_CUBIC`] and [`F3_LINEAR`].
    F3,
    /// `3x + 4y`.
    Linear,
    /// `sum_i x_i^2`, any dimension.
    Sphere,
}

impl Builtin {
    pub const ALL: [Builtin; 5] = [
        Builtin::F1,
        Builtin::F2,
        Builtin::F3,
        Builtin::Linear,
        Builtin::Sphere,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Builtin::F1 => "f1",
            Builtin::F2 => "f2",
            Builtin::F3 => "f3",
            Builtin::Linear => "linear",
            Builtin::Sphere => "sphere",
        }
    }

    /// Dimension used when the caller does not pick one.
    pub fn default_dimension(self) -> usize {
        match self {
            Builtin::F3 => 5,
            _ => 2,
        }
    }

    /// Grid spacing used when the caller does not pick one.
    pub fn default_spacing(self) -> f64 {
        match self {
            Builtin::F3 => 0.2,
            _ => 0.05,
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

impl FromStr for Builtin {
    type Err = AmError;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.id().eq_ignore_ascii_case(s))
            .ok_or_else(|| AmError::InvalidConfig(format!("unknown function id `{s}`")))
    }
}

impl<T: Scalar> Objective<T> for Builtin {
    fn dimension(&self) -> Option<usize> {
        match self {
            Builtin::F1 | Builtin::F2 | Builtin::Linear => Some(2),
            Builtin::F3 => Some(5),
            Builtin::Sphere => None,
        }
    }

    fn value(&self, x: &[T]) -> T {
        match self {
            Builtin::F1 => (x[1] - x[0] * x[0]).exp(),
            Builtin::F2 => x[0].powi(3) + x[1].powi(3) + T::lit(0.2) * x[0] + T::lit(0.6) * x[1],
            Builtin::F3 => x
                .iter()
                .zip(F3_CUBIC.iter().zip(F3_LINEAR))
                .map(|(&xi, (&c, d))| T::lit(c) * xi.powi(3) + T::lit(d) * xi)
                .sum(),
            Builtin::Linear => T::lit(3.0) * x[0] + T::lit(4.0) * x[1],
            Builtin::Sphere => x.iter().map(|&xi| xi * xi).sum(),
        }
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        match self {
            Builtin::F1 => {
                let v = (x[1] - x[0] * x[0]).exp();
                vec![-T::lit(2.0) * x[0] * v, v]
            }
            Builtin::F2 => vec![
                T::lit(3.0) * x[0] * x[0] + T::lit(0.2),
                T::lit(3.0) * x[1] * x[1] + T::lit(0.6),
            ],
            Builtin::F3 => x
                .iter()
                .zip(F3_CUBIC.iter().zip(F3_LINEAR))
                .map(|(&xi, (&c, d))| T::lit(3.0 * c) * xi * xi + T::lit(d))
                .collect(),
            Builtin::Linear => vec![T::lit(3.0), T::lit(4.0)],
            Builtin::Sphere => x.iter().map(|&xi| T::lit(2.0) * xi).collect(),
        }
    }
}

/// Wraps a plain function and supplies central-difference gradients.
pub struct FiniteDifference<F> {
    func: F,
    dimension: Option<usize>,
    step: f64,
}

impl<F> FiniteDifference<F> {
    pub fn new(func: F) -> Self {
        FiniteDifference {
            func,
            dimension: None,
            step: FD_STEP,
        }
    }

    pub fn with_dimension(mut self, n: usize) -> Self {
        self.dimension = Some(n);
        self
    }

    pub fn with_step(mut self, h: f64) -> Self {
        self.step = h;
        self
    }
}

impl<T, F> Objective<T> for FiniteDifference<F>
where
    T: Scalar,
    F: Fn(&[T]) -> T + Sync,
{
    fn dimension(&self) -> Option<usize> {
        self.dimension
    }

    fn value(&self, x: &[T]) -> T {
        (self.func)(x)
    }

    fn gradient(&self, x: &[T]) -> Vec<T> {
        central_difference(&self.func, x, T::lit(self.step))
    }
}

/// Central-difference gradient of `f` at `x` with step `h`.
pub fn central_difference<T: Scalar>(f: impl Fn(&[T]) -> T, x: &[T], h: T) -> Vec<T> {
    let mut probe = x.to_vec();
    let two_h = h + h;
    (0..x.len())
        .map(|i| {
            let xi = probe[i];
            probe[i] = xi + h;
            let up = f(&probe);
            probe[i] = xi - h;
            let down = f(&probe);
            probe[i] = xi;
            (up - down) / two_h
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn f1_at_origin() {
        let (v, g) = Builtin::F1.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(g, vec![0.0, 1.0]);
        let fd = central_difference(|x: &[f64]| Builtin::F1.value(x), &[0.0, 0.0], 1e-5);
        assert!((fd[0] - 0.0).abs() < 1e-9 && (fd[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn f2_values() {
        let (v, g) = Builtin::F2.evaluate(&[0.0, 0.0]).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(g, vec![0.2, 0.6]);
        let (v, g): (f64, _) = Builtin::F2.evaluate(&[1.0, 1.0]).unwrap();
        assert!((v - 2.8).abs() < 1e-15);
        assert!((g[0] - 3.2).abs() < 1e-15 && (g[1] - 3.6).abs() < 1e-15);
    }

    #[test]
    fn non_finite_output_is_an_evaluation_failure() {
        let f = FiniteDifference::new(|x: &[f64]| 1.0 / x[0]);
        match f.evaluate(&[0.0]) {
            Err(AmError::Evaluation { point }) => assert_eq!(point, vec![0.0]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_arity_is_rejected() {
        let err = Objective::<f64>::evaluate(&Builtin::F3, &[0.0, 0.0]).unwrap_err();
        assert!(matches!(
            err,
            AmError::DimensionMismatch {
                expected: 5,
                found: 2
            }
        ));
    }

    #[test]
    fn parses_ids() {
        assert_eq!("F2".parse::<Builtin>().unwrap(), Builtin::F2);
        assert!("f9".parse::<Builtin>().is_err());
    }
}
