//! Points, the regular lattice over `[-1,1]^n`, and sampled gradient fields.

use std::ops::Deref;

use rayon::prelude::*;

use crate::error::{AmError, Result};
use crate::objective::Objective;
use crate::scalar::{norm, Scalar};

/// Default cap on the number of lattice points a grid may hold.
pub const DEFAULT_MAX_GRID_POINTS: usize = 20_000_000;

/// Slack for deciding that a coordinate lies inside the hypercube.
pub const DOMAIN_SLACK: f64 = 1e-12;

/// A point of `R^n`, usually inside `[-1,1]^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct Point<T>(Vec<T>);

impl<T: Scalar> Point<T> {
    pub fn new(coords: Vec<T>) -> Self {
        Point(coords)
    }

    pub fn origin(dimension: usize) -> Self {
        Point(vec![T::zero(); dimension])
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn dimension(&self) -> usize {
        self.0.len()
    }

    /// Whether every coordinate lies in `[-1 - 1e-12, 1 + 1e-12]`.
    pub fn in_domain(&self) -> bool {
        let bound = T::one() + T::lit(DOMAIN_SLACK);
        self.0.iter().all(|c| c.abs() <= bound)
    }

    /// Componentwise clamp into `[-1,1]^n`.
    pub fn clamped(&self) -> Self {
        Point(self.0.iter().map(|&c| clamp_unit(c)).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.as_f64()).collect()
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T: Scalar> From<Vec<T>> for Point<T> {
    fn from(v: Vec<T>) -> Self {
        Point(v)
    }
}

#[inline]
pub(crate) fn clamp_unit<T: Scalar>(c: T) -> T {
    c.max(-T::one()).min(T::one())
}

/// The regular lattice with pitch `spacing` over `[-1,1]^n`, in row-major
/// order (first coordinate slowest).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lattice<T> {
    dimension: usize,
    spacing: T,
    per_axis: usize,
    len: usize,
}

impl<T: Scalar> Lattice<T> {
    pub fn new(dimension: usize, spacing: T) -> Result<Self> {
        Self::with_cap(dimension, spacing, DEFAULT_MAX_GRID_POINTS)
    }

    pub fn with_cap(dimension: usize, spacing: T, cap: usize) -> Result<Self> {
        if dimension == 0 {
            return Err(AmError::ZeroDimension);
        }
        let h = spacing.as_f64();
        if !(h > 0.0 && h <= 2.0) {
            return Err(AmError::InvalidSpacing(h));
        }
        // the slack absorbs 2/h landing just under an integer
        let ratio = 2.0 / h;
        let slack = (16.0 * T::epsilon().as_f64() * ratio).max(1e-9);
        let per_axis = (ratio + slack).floor() as usize + 1;
        let points = (per_axis as f64).powi(dimension as i32);
        if points > cap as f64 {
            return Err(AmError::GridTooLarge { points, cap });
        }
        Ok(Lattice {
            dimension,
            spacing,
            per_axis,
            len: per_axis.pow(dimension as u32),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    pub fn per_axis(&self) -> usize {
        self.per_axis
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coordinate of lattice index `i` along any axis.
    pub fn axis_coord(&self, i: usize) -> T {
        let c = T::from_index(i) * self.spacing - T::one();
        let tol = T::lit(1e-9).max(T::lit(64.0) * T::epsilon());
        if i + 1 == self.per_axis && (c - T::one()).abs() <= tol {
            T::one()
        } else {
            c
        }
    }

    /// Nearest axis index to `c`, ties going to the smaller index.
    pub fn axis_index(&self, c: T) -> usize {
        let r = (clamp_unit(c) + T::one()) / self.spacing;
        let i = (r - T::lit(0.5)).ceil().max(T::zero());
        i.to_usize().unwrap_or(0).min(self.per_axis - 1)
    }

    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.dimension];
        for slot in idx.iter_mut().rev() {
            *slot = flat % self.per_axis;
            flat /= self.per_axis;
        }
        idx
    }

    pub fn flat_index(&self, multi: &[usize]) -> usize {
        multi.iter().fold(0, |acc, &i| acc * self.per_axis + i)
    }

    pub fn location(&self, flat: usize) -> Point<T> {
        Point(
            self.multi_index(flat)
                .into_iter()
                .map(|i| self.axis_coord(i))
                .collect(),
        )
    }

    /// Flat index of the lattice point nearest `p` (clamped into the domain
    /// first). O(n) per-axis rounding.
    pub fn nearest_index(&self, p: &[T]) -> usize {
        debug_assert_eq!(p.len(), self.dimension);
        p.iter()
            .fold(0, |acc, &c| acc * self.per_axis + self.axis_index(c))
    }

    pub fn points(&self) -> impl Iterator<Item = Point<T>> + '_ {
        (0..self.len).map(move |i| self.location(i))
    }
}

/// All lattice points of `[-1,1]^dimension` at the given spacing.
pub fn build_grid<T: Scalar>(dimension: usize, spacing: T) -> Result<Vec<Point<T>>> {
    Ok(Lattice::new(dimension, spacing)?.points().collect())
}

/// A view of one sample of a [`GradientField`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSample<'a, T> {
    pub index: usize,
    pub location: Point<T>,
    /// Raw gradient as evaluated.
    pub gradient: &'a [T],
    /// Unit gradient; all zeros when `zero_gradient` is set.
    pub direction: &'a [T],
    pub value: T,
    pub zero_gradient: bool,
}

/// Function values and gradients sampled on every lattice point.
///
/// Raw gradients are kept next to the normalized directions: the manifold
/// builder walks the unit field, the active subspace averages raw outer
/// products.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientField<T> {
    lattice: Lattice<T>,
    values: Vec<T>,
    gradients: Vec<T>,
    directions: Vec<T>,
    zero_gradient: Vec<bool>,
}

impl<T: Scalar> GradientField<T> {
    /// Assembles a field from per-sample values and flat row-major raw
    /// gradients, normalizing each gradient.
    pub fn from_samples(lattice: Lattice<T>, values: Vec<T>, gradients: Vec<T>) -> Result<Self> {
        let n = lattice.dimension();
        if values.len() != lattice.len() {
            return Err(AmError::DimensionMismatch {
                expected: lattice.len(),
                found: values.len(),
            });
        }
        if gradients.len() != lattice.len() * n {
            return Err(AmError::DimensionMismatch {
                expected: lattice.len() * n,
                found: gradients.len(),
            });
        }
        let mut directions = vec![T::zero(); gradients.len()];
        let mut zero_gradient = vec![false; values.len()];
        for ((g, d), flag) in gradients
            .chunks_exact(n)
            .zip(directions.chunks_exact_mut(n))
            .zip(zero_gradient.iter_mut())
        {
            let len = norm(g);
            if len > T::min_positive_value() && len.is_finite() {
                for (di, &gi) in d.iter_mut().zip(g) {
                    *di = gi / len;
                }
            } else {
                *flag = true;
            }
        }
        Ok(GradientField {
            lattice,
            values,
            gradients,
            directions,
            zero_gradient,
        })
    }

    pub fn lattice(&self) -> &Lattice<T> {
        &self.lattice
    }

    pub fn dimension(&self) -> usize {
        self.lattice.dimension()
    }

    pub fn spacing(&self) -> T {
        self.lattice.spacing()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn raw_gradients(&self) -> &[T] {
        &self.gradients
    }

    pub fn value(&self, index: usize) -> T {
        self.values[index]
    }

    pub fn gradient(&self, index: usize) -> &[T] {
        let n = self.dimension();
        &self.gradients[index * n..(index + 1) * n]
    }

    pub fn direction(&self, index: usize) -> &[T] {
        let n = self.dimension();
        &self.directions[index * n..(index + 1) * n]
    }

    pub fn is_zero_gradient(&self, index: usize) -> bool {
        self.zero_gradient[index]
    }

    pub fn sample(&self, index: usize) -> GradientSample<'_, T> {
        GradientSample {
            index,
            location: self.lattice.location(index),
            gradient: self.gradient(index),
            direction: self.direction(index),
            value: self.values[index],
            zero_gradient: self.zero_gradient[index],
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = GradientSample<'_, T>> + '_ {
        (0..self.len()).map(move |i| self.sample(i))
    }

    pub fn nearest_index(&self, p: &[T]) -> usize {
        self.lattice.nearest_index(p)
    }

    /// Value at the lattice point nearest `p`.
    pub fn nearest_value(&self, p: &[T]) -> T {
        self.values[self.nearest_index(p)]
    }

    pub fn max_gradient_norm(&self) -> T {
        self.gradients
            .chunks_exact(self.dimension())
            .map(norm)
            .fold(T::zero(), T::max)
    }
}

/// The sample of `field` nearest to `p`; `p` is clamped into the domain first.
pub fn nearest_grid_point<'a, T: Scalar>(
    field: &'a GradientField<T>,
    p: &[T],
) -> Result<GradientSample<'a, T>> {
    if p.len() != field.dimension() {
        return Err(AmError::DimensionMismatch {
            expected: field.dimension(),
            found: p.len(),
        });
    }
    Ok(field.sample(field.nearest_index(p)))
}

/// Evaluates `objective` on every lattice point and normalizes the gradients.
///
/// Runs in parallel; the result does not depend on the thread count.
pub fn build_gradient_field<T, O>(
    objective: &O,
    dimension: usize,
    spacing: T,
) -> Result<GradientField<T>>
where
    T: Scalar,
    O: Objective<T> + ?Sized,
{
    let lattice = Lattice::new(dimension, spacing)?;
    if let Some(n) = objective.dimension() {
        if n != dimension {
            return Err(AmError::DimensionMismatch {
                expected: n,
                found: dimension,
            });
        }
    }
    let evaluated: Vec<Result<(T, Vec<T>)>> = (0..lattice.len())
        .into_par_iter()
        .map(|i| objective.evaluate(&lattice.location(i)))
        .collect();
    let mut values = Vec::with_capacity(lattice.len());
    let mut gradients = Vec::with_capacity(lattice.len() * dimension);
    for (index, r) in evaluated.into_iter().enumerate() {
        match r {
            Ok((v, g)) => {
                values.push(v);
                gradients.extend(g);
            }
            Err(AmError::Evaluation { point }) => {
                return Err(AmError::FieldEvaluation { index, point })
            }
            Err(e) => return Err(e),
        }
    }
    GradientField::from_samples(lattice, values, gradients)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::{Builtin, FiniteDifference};

    #[test]
    fn one_dimensional_unit_spacing() {
        let pts = build_grid(1, 1.0f64).unwrap();
        let coords: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        assert_eq!(coords, vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn grid_size_at_five_hundredths() {
        let pts = build_grid(2, 0.05f64).unwrap();
        assert_eq!(pts.len(), 41 * 41);
        assert_eq!(pts.first().unwrap().coords(), &[-1.0, -1.0]);
        assert_eq!(pts.last().unwrap().coords(), &[1.0, 1.0]);
        assert_eq!(pts[1].coords(), &[-1.0, -0.95]);
    }

    #[test]
    fn spacing_two_gives_cube_corners() {
        let pts = build_grid(3, 2.0f64).unwrap();
        assert_eq!(pts.len(), 8);
        for p in &pts {
            assert!(p.iter().all(|c| c.abs() == 1.0));
        }
    }

    #[test]
    fn rejects_bad_spacing_and_huge_grids() {
        assert!(matches!(
            build_grid(2, 0.0f64),
            Err(AmError::InvalidSpacing(_))
        ));
        assert!(matches!(
            build_grid(2, -0.1f64),
            Err(AmError::InvalidSpacing(_))
        ));
        assert!(matches!(
            build_grid(2, 2.5f64),
            Err(AmError::InvalidSpacing(_))
        ));
        assert!(matches!(
            Lattice::with_cap(3, 0.05f64, 1000),
            Err(AmError::GridTooLarge { .. })
        ));
        assert!(matches!(build_grid(0, 0.5f64), Err(AmError::ZeroDimension)));
    }

    #[test]
    fn nearest_by_rounding() {
        let field = build_gradient_field(&Builtin::F2, 2, 0.05f64).unwrap();
        let s = nearest_grid_point(&field, &[0.012, -0.988]).unwrap();
        assert_eq!(s.location.coords(), &[0.0, -1.0]);
    }

    #[test]
    fn midpoint_tie_goes_to_smaller_index() {
        let f = FiniteDifference::new(|x: &[f64]| x[0]);
        let field = build_gradient_field(&f, 1, 1.0).unwrap();
        let s = nearest_grid_point(&field, &[0.5]).unwrap();
        assert_eq!(s.index, 1);
        assert_eq!(s.location.coords(), &[0.0]);
        let s = nearest_grid_point(&field, &[-0.5]).unwrap();
        assert_eq!(s.location.coords(), &[-1.0]);
    }

    #[test]
    fn outside_points_are_clamped() {
        let field = build_gradient_field(&Builtin::F1, 2, 0.5f64).unwrap();
        let s = nearest_grid_point(&field, &[3.0, -7.0]).unwrap();
        assert_eq!(s.location.coords(), &[1.0, -1.0]);
    }

    #[test]
    fn f1_normalized_direction_at_origin() {
        let field = build_gradient_field(&Builtin::F1, 2, 0.5f64).unwrap();
        let s = nearest_grid_point(&field, &[0.0, 0.0]).unwrap();
        assert_eq!(s.location.coords(), &[0.0, 0.0]);
        assert_eq!(s.direction, &[0.0, 1.0]);
        assert!(!s.zero_gradient);
    }

    #[test]
    fn f2_field_has_no_zero_gradients() {
        let field = build_gradient_field(&Builtin::F2, 2, 0.05f64).unwrap();
        assert_eq!(field.len(), 1681);
        assert!(field.samples().all(|s| !s.zero_gradient));
    }

    #[test]
    fn constant_function_flags_everything() {
        let f = FiniteDifference::new(|_: &[f64]| 4.2);
        let field = build_gradient_field(&f, 2, 0.25).unwrap();
        assert!(field
            .samples()
            .all(|s| s.zero_gradient && s.direction == [0.0, 0.0]));
    }

    #[test]
    fn evaluation_failure_carries_grid_index() {
        let f = FiniteDifference::new(|x: &[f64]| if x[0] > 0.9 { f64::NAN } else { x[0] });
        match build_gradient_field(&f, 1, 0.5) {
            Err(AmError::FieldEvaluation { index, point }) => {
                assert_eq!(index, 4);
                assert_eq!(point, vec![1.0]);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn lattice_index_roundtrip() {
        let lattice = Lattice::new(3, 0.25f64).unwrap();
        for i in 0..lattice.len() {
            let p = lattice.location(i);
            assert_eq!(lattice.nearest_index(&p), i);
            assert_eq!(lattice.flat_index(&lattice.multi_index(i)), i);
        }
    }

    #[test]
    fn generic_over_f32() {
        let field = build_gradient_field(&Builtin::F2, 2, 0.1f32).unwrap();
        assert_eq!(field.len(), 21 * 21);
        let s = nearest_grid_point(&field, &[1.0f32, 1.0]).unwrap();
        assert!((s.value - 2.8).abs() < 1e-6);
    }
}
