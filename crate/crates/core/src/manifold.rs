//! Discrete steepest ascent/descent over a gradient field, producing the
//! one-dimensional active manifold and its `(s, z)` training pairs.

use crate::error::{AmError, Result};
use crate::geometry::{clamp_unit, GradientField, Point};
use crate::scalar::{distance, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ascent,
    Descent,
}

impl Direction {
    fn sign<T: Scalar>(self) -> T {
        match self {
            Direction::Ascent => T::one(),
            Direction::Descent => -T::one(),
        }
    }

    /// Whether moving from value `from` to `to` goes against this direction.
    fn regresses<T: Scalar>(self, from: T, to: T) -> bool {
        match self {
            Direction::Ascent => to < from,
            Direction::Descent => to > from,
        }
    }
}

/// Why a trace stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceStop {
    ZeroGradient,
    /// The clamped step moved less than a tenth of the step length.
    Stalled,
    /// The step was clipped by the hypercube. The clipped point is the
    /// terminus unless it snaps to the same sample as the previous point.
    Boundary,
    /// The new point came back within a tenth of a step of a recent point.
    Cycle,
    /// The sampled value would have moved against the trace direction.
    NonMonotone,
    MaxSteps,
}

/// Step length and iteration budget for a trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceOptions<T> {
    pub step: T,
    pub max_steps: usize,
}

impl<T: Scalar> TraceOptions<T> {
    /// Step equal to the grid spacing, budget of `10 * points_per_axis * n`.
    pub fn for_field(field: &GradientField<T>) -> Self {
        let lattice = field.lattice();
        TraceOptions {
            step: lattice.spacing(),
            max_steps: 10 * lattice.per_axis() * lattice.dimension(),
        }
    }
}

/// Follows the unit gradient field from `x0`.
///
/// Each step is `p <- clamp(p ± step * g(p))` with `g` the normalized
/// gradient of the nearest sample. Returns the visited points, `x0` first,
/// and the reason the walk ended.
pub fn trace_path<T: Scalar>(
    field: &GradientField<T>,
    x0: &Point<T>,
    direction: Direction,
    opts: TraceOptions<T>,
) -> Result<(Vec<Point<T>>, TraceStop)> {
    let n = field.dimension();
    if x0.dimension() != n {
        return Err(AmError::DimensionMismatch {
            expected: n,
            found: x0.dimension(),
        });
    }
    if !(opts.step > T::zero()) {
        return Err(AmError::InvalidConfig("trace step must be positive".into()));
    }
    let start = x0.clamped();
    let mut current_index = field.nearest_index(&start);
    if field.is_zero_gradient(current_index) {
        return Err(AmError::StalledAtStart {
            point: start.to_f64(),
        });
    }

    let sign: T = direction.sign();
    let min_move = opts.step / T::lit(10.0);
    let mut path = vec![start];
    let mut stop = TraceStop::MaxSteps;
    for _ in 0..opts.max_steps {
        if field.is_zero_gradient(current_index) {
            stop = TraceStop::ZeroGradient;
            break;
        }
        let here = path.last().expect("path starts non-empty");
        let unit = field.direction(current_index);
        let mut clipped = false;
        let next: Vec<T> = here
            .iter()
            .zip(unit)
            .map(|(&c, &g)| {
                let raw = c + sign * opts.step * g;
                let c = clamp_unit(raw);
                clipped |= c != raw;
                c
            })
            .collect();
        if distance(here, &next) < min_move {
            stop = TraceStop::Stalled;
            break;
        }
        let window = path.len().saturating_sub(3);
        if path[window..].iter().any(|q| distance(q, &next) < min_move) {
            stop = TraceStop::Cycle;
            break;
        }
        let next_index = field.nearest_index(&next);
        if clipped && next_index == current_index {
            // pressed against the face without reaching a new sample
            stop = TraceStop::Boundary;
            break;
        }
        if direction.regresses(field.value(current_index), field.value(next_index)) {
            stop = TraceStop::NonMonotone;
            break;
        }
        path.push(Point::new(next));
        current_index = next_index;
        if clipped {
            stop = TraceStop::Boundary;
            break;
        }
    }
    Ok((path, stop))
}

/// Ordered polyline from the descent terminus to the ascent terminus with
/// step parameters `S` in `[0,1]` and sampled values `Z`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveManifold<T> {
    points: Vec<Point<T>>,
    params: Vec<T>,
    values: Vec<T>,
    seed_point: Point<T>,
}

impl<T: Scalar> ActiveManifold<T> {
    /// Builds a manifold from explicit parts, checking every invariant.
    pub fn from_parts(
        points: Vec<Point<T>>,
        params: Vec<T>,
        values: Vec<T>,
        seed_point: Point<T>,
    ) -> Result<Self> {
        let m = ActiveManifold {
            points,
            params,
            values,
            seed_point,
        };
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<()> {
        let len = self.points.len();
        if len < 2 {
            return Err(AmError::DegenerateManifold);
        }
        if self.params.len() != len || self.values.len() != len {
            return Err(AmError::InvalidConfig(format!(
                "manifold has {len} points but {} params and {} values",
                self.params.len(),
                self.values.len()
            )));
        }
        let n = self.points[0].dimension();
        if let Some(p) = self.points.iter().find(|p| p.dimension() != n) {
            return Err(AmError::DimensionMismatch {
                expected: n,
                found: p.dimension(),
            });
        }
        if self.params[0] != T::zero() || self.params[len - 1] != T::one() {
            return Err(AmError::InvalidConfig(
                "manifold parameters must run from 0 to 1".into(),
            ));
        }
        if self.params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(AmError::InvalidConfig(
                "manifold parameters must be strictly increasing".into(),
            ));
        }
        if self.values.windows(2).any(|w| w[1] < w[0]) {
            return Err(AmError::InvalidConfig(
                "manifold values must be non-decreasing".into(),
            ));
        }
        if self.points.windows(2).any(|w| w[0] == w[1]) {
            return Err(AmError::DegenerateManifold);
        }
        if self.points.iter().any(|p| !p.in_domain()) {
            return Err(AmError::InvalidConfig(
                "manifold points must lie in [-1,1]^n".into(),
            ));
        }
        Ok(())
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn seed_point(&self) -> &Point<T> {
        &self.seed_point
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.points[0].dimension()
    }

    /// `max Z - min Z`.
    pub fn value_range(&self) -> T {
        self.values[self.values.len() - 1] - self.values[0]
    }

    pub fn pairs(&self) -> Vec<(T, T)> {
        manifold_to_pairs(self)
    }
}

/// Builds the manifold through `x0`: the reversed descent path followed by
/// the ascent path, with `S[k] = k / (len - 1)` and `Z[k]` the value of the
/// sample nearest `points[k]`.
pub fn build_active_manifold<T: Scalar>(
    field: &GradientField<T>,
    x0: &Point<T>,
    opts: TraceOptions<T>,
) -> Result<ActiveManifold<T>> {
    let (mut points, _) = trace_path(field, x0, Direction::Descent, opts)?;
    let (ascent, _) = trace_path(field, x0, Direction::Ascent, opts)?;
    points.reverse();
    points.extend(ascent.into_iter().skip(1));
    points.dedup();
    if points.len() < 2 {
        return Err(AmError::DegenerateManifold);
    }
    let last = T::from_index(points.len() - 1);
    let params: Vec<T> = (0..points.len()).map(|k| T::from_index(k) / last).collect();
    let values: Vec<T> = points.iter().map(|p| field.nearest_value(p)).collect();
    ActiveManifold::from_parts(points, params, values, x0.clamped())
}

/// The `(s, z)` pairs of a manifold, in order.
pub fn manifold_to_pairs<T: Scalar>(m: &ActiveManifold<T>) -> Vec<(T, T)> {
    m.params
        .iter()
        .copied()
        .zip(m.values.iter().copied())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::build_gradient_field;
    use crate::objective::{Builtin, FiniteDifference, Objective};

    fn f2_field() -> GradientField<f64> {
        build_gradient_field(&Builtin::F2, 2, 0.05).unwrap()
    }

    #[test]
    fn identity_line_manifold() {
        let f = FiniteDifference::new(|x: &[f64]| x[0]);
        let field = build_gradient_field(&f, 1, 0.5).unwrap();
        let m = build_active_manifold(&field, &Point::origin(1), TraceOptions::for_field(&field))
            .unwrap();
        let xs: Vec<f64> = m.points().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        assert_eq!(m.params(), &[0.0, 0.25, 0.5, 0.75, 1.0]);
        let pairs = m.pairs();
        assert_eq!(pairs.len(), 5);
        for ((s, z), (es, ez)) in pairs.iter().zip([
            (0.0, -1.0),
            (0.25, -0.5),
            (0.5, 0.0),
            (0.75, 0.5),
            (1.0, 1.0),
        ]) {
            assert_eq!(*s, es);
            assert!((z - ez).abs() < 1e-9);
        }
    }

    #[test]
    fn f2_descent_reaches_the_minimum_corner() {
        let field = f2_field();
        let opts = TraceOptions::for_field(&field);
        let (path, _) = trace_path(&field, &Point::origin(2), Direction::Descent, opts).unwrap();
        let last = path.last().unwrap();
        assert_eq!(path[0].coords(), &[0.0, 0.0]);
        // the trace stops at the y = -1 face
        assert!(last[1] <= -0.975);
        assert!(last[0] < 0.0);
    }

    #[test]
    fn f2_ascent_terminates_on_the_upper_face() {
        let field = f2_field();
        let opts = TraceOptions::for_field(&field);
        let (path, stop) = trace_path(&field, &Point::origin(2), Direction::Ascent, opts).unwrap();
        let last = path.last().unwrap();
        assert_eq!(stop, TraceStop::Boundary);
        let top = field.sample(field.nearest_index(last));
        assert_eq!(top.location[1], 1.0);
        assert!(last[0] > 0.0 && last[0] < 1.0);
        // coordinates increase monotonically because both partials are positive
        for w in path.windows(2) {
            assert!(w[1][0] > w[0][0] && w[1][1] > w[0][1]);
        }
    }

    #[test]
    fn f2_manifold_endpoints() {
        let field = f2_field();
        let m = build_active_manifold(&field, &Point::origin(2), TraceOptions::for_field(&field))
            .unwrap();
        let first = &m.points()[0];
        let last = &m.points()[m.len() - 1];
        let z = m.values();
        let f_first: f64 = Builtin::F2.value(&field.sample(field.nearest_index(first)).location);
        assert_eq!(z[0], f_first);
        assert_eq!(z[0], -z[z.len() - 1]);
        assert!(first[1] <= -0.975 && last[1] >= 0.975);
        assert!(z.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn f1_manifold_climbs_to_top_edge() {
        let field = build_gradient_field(&Builtin::F1, 2, 0.05).unwrap();
        let m = build_active_manifold(&field, &Point::origin(2), TraceOptions::for_field(&field))
            .unwrap();
        let last = &m.points()[m.len() - 1];
        assert_eq!(last[1], 1.0);
        assert!(m.values().windows(2).all(|w| w[1] > w[0]));
        assert!(m.points().iter().all(|p| p[0] == 0.0));
        assert_eq!(m.len(), 41);
    }

    #[test]
    fn constant_field_stalls_at_start() {
        let f = FiniteDifference::new(|_: &[f64]| 1.0);
        let field = build_gradient_field(&f, 2, 0.5).unwrap();
        let opts = TraceOptions::for_field(&field);
        for x0 in [[0.0, 0.0], [0.3, -0.9]] {
            let err =
                trace_path(&field, &Point::new(x0.to_vec()), Direction::Ascent, opts).unwrap_err();
            assert!(matches!(err, AmError::StalledAtStart { .. }));
        }
        assert!(matches!(
            build_active_manifold(&field, &Point::origin(2), opts),
            Err(AmError::StalledAtStart { .. })
        ));
    }

    #[test]
    fn seed_at_interior_maximum_is_degenerate() {
        // -(x^2+y^2) sampled on a grid whose center is a flagged critical point
        let f = FiniteDifference::new(|x: &[f64]| -(x[0] * x[0] + x[1] * x[1]));
        let field = build_gradient_field(&f, 2, 0.5).unwrap();
        let err = build_active_manifold(&field, &Point::origin(2), TraceOptions::for_field(&field))
            .unwrap_err();
        assert!(matches!(err, AmError::StalledAtStart { .. }));
    }

    #[test]
    fn ridge_oscillation_is_cut_short() {
        // |x| has a kink along x = 0; descent from near it bounces across
        let f = FiniteDifference::new(|x: &[f64]| -x[0].abs() + 0.01 * x[1]);
        let field = build_gradient_field(&f, 2, 0.1).unwrap();
        let opts = TraceOptions::for_field(&field);
        let (path, stop) = trace_path(
            &field,
            &Point::new(vec![0.02, 0.0]),
            Direction::Ascent,
            opts,
        )
        .unwrap();
        assert!(path.len() < opts.max_steps);
        assert_ne!(stop, TraceStop::MaxSteps);
    }

    #[test]
    fn from_parts_rejects_bad_parameters() {
        let pts = vec![Point::new(vec![0.0]), Point::new(vec![0.5])];
        let o = Point::origin(1);
        assert!(
            ActiveManifold::from_parts(pts.clone(), vec![0.0, 0.5], vec![0.0, 1.0], o.clone())
                .is_err()
        );
        assert!(
            ActiveManifold::from_parts(pts.clone(), vec![0.0, 1.0], vec![1.0, 0.0], o.clone())
                .is_err()
        );
        assert!(ActiveManifold::from_parts(pts, vec![0.0, 1.0], vec![0.0, 1.0], o).is_ok());
    }
}
