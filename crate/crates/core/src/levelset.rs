//! Projection of query points onto an active manifold by walking along
//! their level set.

use std::fmt;

use thiserror::Error;

use crate::error::{AmError, Result};
use crate::geometry::{clamp_unit, GradientField, Point};
use crate::manifold::ActiveManifold;
use crate::objective::Objective;
use crate::scalar::{distance, distance_squared, dot, norm, Scalar};
use crate::surrogate::PolynomialSurrogate;

/// Below this length a projected step direction counts as zero.
const TANGENT_EPS: f64 = 1e-12;
/// Below this magnitude the segment/hyperplane denominator counts as zero.
const SEGMENT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraversalConfig<T> {
    /// Distance to the nearest manifold vertex that counts as a hit.
    pub hit_tolerance: T,
    /// Length of each level-set step.
    pub step: T,
    pub max_iters: usize,
    /// Largest allowed `|f(p_k) - f(p_0)|`, measured with sampled values.
    pub drift_tolerance: T,
}

impl<T: Scalar> TraversalConfig<T> {
    /// Hit tolerance equal to the grid spacing, step of a quarter spacing,
    /// `10 * points_per_axis * n` iterations and a drift budget of a tenth
    /// of the manifold's value range.
    pub fn defaults_for(field: &GradientField<T>, manifold: &ActiveManifold<T>) -> Self {
        let lattice = field.lattice();
        TraversalConfig {
            hit_tolerance: lattice.spacing(),
            step: lattice.spacing() / T::lit(4.0),
            max_iters: 10 * lattice.per_axis() * lattice.dimension(),
            drift_tolerance: T::lit(0.1) * manifold.value_range(),
        }
    }

    pub fn validate(&self, spacing: T) -> Result<()> {
        let positive = self.hit_tolerance > T::zero()
            && self.step > T::zero()
            && self.drift_tolerance > T::zero()
            && self.max_iters > 0;
        if !positive {
            return Err(AmError::InvalidConfig(
                "traversal tolerances, step and iteration budget must be positive".into(),
            ));
        }
        if self.step > spacing {
            return Err(AmError::InvalidConfig(
                "traversal step must not exceed the grid spacing".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TraversalFailure {
    NoIntersection,
    TangentStall,
    DriftExceeded,
    /// The walk ran into the hypercube boundary before meeting the manifold.
    ExitedDomain,
    /// The gradient sample under the walker is flagged zero.
    ZeroGradient,
}

impl TraversalFailure {
    pub fn label(self) -> &'static str {
        match self {
            TraversalFailure::NoIntersection => "no_intersection",
            TraversalFailure::TangentStall => "tangent_stall",
            TraversalFailure::DriftExceeded => "drift_exceeded",
            TraversalFailure::ExitedDomain => "exited_domain",
            TraversalFailure::ZeroGradient => "zero_gradient",
        }
    }
}

impl fmt::Display for TraversalFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("traversal failed ({failure}) after {iterations} iterations, drift {drift:e}")]
pub struct TraversalError {
    pub failure: TraversalFailure,
    pub iterations: usize,
    pub drift: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionResult<T> {
    pub query: Point<T>,
    /// Manifold parameter of the landing point, in `[0,1]`.
    pub landing_param: T,
    pub landing_point: Point<T>,
    /// Filled in by [`estimate_at`].
    pub estimate: Option<T>,
    pub iterations: usize,
    pub drift: T,
    /// The segment parameter had to be clamped into `[0,1]`.
    pub clamped: bool,
}

/// One step of a traversal, for inspection.
#[derive(Debug, Clone, PartialEq)]
pub struct TraversalStep<T> {
    pub position: Point<T>,
    /// Unit gradient at `position`.
    pub normal: Vec<T>,
    /// Unit step direction, orthogonal to `normal`.
    pub direction: Vec<T>,
}

/// Index and position of the manifold vertex nearest `p`; ties go to the
/// smaller index.
pub fn nearest_manifold_point<'a, T: Scalar>(
    manifold: &'a ActiveManifold<T>,
    p: &[T],
) -> (usize, &'a Point<T>) {
    let mut best = 0;
    let mut best_d = T::infinity();
    for (i, m) in manifold.points().iter().enumerate() {
        let d = distance_squared(m, p);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    (best, &manifold.points()[best])
}

/// `u - <u, e0> e0`: the component of `u` orthogonal to the unit normal.
pub fn orthogonal_project<T: Scalar>(u: &[T], unit_normal: &[T]) -> Result<Vec<T>> {
    if u.len() != unit_normal.len() {
        return Err(AmError::DimensionMismatch {
            expected: unit_normal.len(),
            found: u.len(),
        });
    }
    if !(norm(unit_normal) > T::zero()) {
        return Err(AmError::UndefinedGradientDirection);
    }
    let along = dot(u, unit_normal);
    Ok(u.iter()
        .zip(unit_normal)
        .map(|(&ui, &ei)| ui - along * ei)
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentParameter<T> {
    /// Parameter clamped into `[0,1]`.
    pub t: T,
    /// Parameter before clamping.
    pub raw: T,
    pub clamped: bool,
}

/// Parameter `t` where the segment `m_i + t (m_next - m_i)` crosses the
/// hyperplane through `p` orthogonal to `unit_normal`.
pub fn segment_parameter<T: Scalar>(
    m_i: &[T],
    m_next: &[T],
    p: &[T],
    unit_normal: &[T],
) -> Result<SegmentParameter<T>> {
    let num = m_i
        .iter()
        .zip(p)
        .zip(unit_normal)
        .fold(T::zero(), |acc, ((&m, &pk), &e)| acc + (pk - m) * e);
    let den = m_i
        .iter()
        .zip(m_next)
        .zip(unit_normal)
        .fold(T::zero(), |acc, ((&a, &b), &e)| acc + (b - a) * e);
    if den.abs() < T::lit(SEGMENT_EPS) {
        return Err(AmError::SegmentTangent);
    }
    let raw = num / den;
    let t = raw.max(T::zero()).min(T::one());
    Ok(SegmentParameter {
        t,
        raw,
        clamped: t != raw,
    })
}

/// Where the walker takes its level-set normal from.
#[derive(Clone, Copy)]
pub enum NormalSource<'a, T> {
    /// Unit gradient of the nearest field sample.
    Field,
    /// Exact gradient of the objective at the current position.
    Exact(&'a dyn Objective<T>),
}

/// Walks from `p` along its level set until it meets the manifold.
///
/// Each iteration takes the unit normal at `p_k`, the nearest manifold vertex
/// `m`, and steps `p_{k+1} = clamp(p_k + step * v)` with `v` the normalized
/// component of `m - p_k` orthogonal to the normal. On a hit the landing
/// parameter is found on the segment between `m` and its closer neighbour.
pub fn traverse_to_manifold<T: Scalar>(
    field: &GradientField<T>,
    manifold: &ActiveManifold<T>,
    p: &Point<T>,
    cfg: &TraversalConfig<T>,
) -> Result<ProjectionResult<T>> {
    traverse_with(field, manifold, p, cfg, NormalSource::Field, None)
}

/// [`traverse_to_manifold`] with a choice of normal source, optionally
/// recording every step.
pub fn traverse_with<T: Scalar>(
    field: &GradientField<T>,
    manifold: &ActiveManifold<T>,
    p: &Point<T>,
    cfg: &TraversalConfig<T>,
    normals: NormalSource<'_, T>,
    mut record: Option<&mut Vec<TraversalStep<T>>>,
) -> Result<ProjectionResult<T>> {
    let n = field.dimension();
    if p.dimension() != n || manifold.dimension() != n {
        return Err(AmError::DimensionMismatch {
            expected: n,
            found: if p.dimension() != n {
                p.dimension()
            } else {
                manifold.dimension()
            },
        });
    }
    cfg.validate(field.spacing())?;

    let mut pos = p.clamped();
    let start_value = field.nearest_value(&pos);
    let mut drift = T::zero();
    let mut iterations = 0;
    let fail = |failure, iterations, drift: T| -> AmError {
        AmError::Traversal(TraversalError {
            failure,
            iterations,
            drift: drift.as_f64(),
        })
    };

    loop {
        let normal = match unit_normal(field, &pos, normals) {
            Some(e) => e,
            None => return Err(fail(TraversalFailure::ZeroGradient, iterations, drift)),
        };
        let (idx, nearest) = nearest_manifold_point(manifold, &pos);
        if distance(nearest, &pos) < cfg.hit_tolerance {
            return Ok(land(manifold, pos, p, idx, &normal, iterations, drift));
        }
        if iterations >= cfg.max_iters {
            return Err(fail(TraversalFailure::NoIntersection, iterations, drift));
        }
        let toward: Vec<T> = nearest
            .iter()
            .zip(pos.iter())
            .map(|(&m, &x)| m - x)
            .collect();
        let v = orthogonal_project(&toward, &normal)?;
        let len = norm(&v);
        if !(len > T::lit(TANGENT_EPS) * T::one().max(norm(&toward))) {
            return Err(fail(TraversalFailure::TangentStall, iterations, drift));
        }
        let dir: Vec<T> = v.iter().map(|&c| c / len).collect();
        let next: Vec<T> = pos
            .iter()
            .zip(&dir)
            .map(|(&x, &d)| clamp_unit(x + cfg.step * d))
            .collect();
        if distance(&next, &pos) < cfg.step / T::lit(10.0) {
            return Err(fail(TraversalFailure::ExitedDomain, iterations, drift));
        }
        if let Some(rec) = record.as_deref_mut() {
            rec.push(TraversalStep {
                position: pos.clone(),
                normal,
                direction: dir,
            });
        }
        pos = Point::new(next);
        iterations += 1;
        drift = drift.max((field.nearest_value(&pos) - start_value).abs());
        if drift > cfg.drift_tolerance {
            return Err(fail(TraversalFailure::DriftExceeded, iterations, drift));
        }
    }
}

fn unit_normal<T: Scalar>(
    field: &GradientField<T>,
    pos: &[T],
    normals: NormalSource<'_, T>,
) -> Option<Vec<T>> {
    match normals {
        NormalSource::Field => {
            let i = field.nearest_index(pos);
            (!field.is_zero_gradient(i)).then(|| field.direction(i).to_vec())
        }
        NormalSource::Exact(obj) => {
            let g = obj.gradient(pos);
            let len = norm(&g);
            (len > T::min_positive_value() && len.is_finite())
                .then(|| g.into_iter().map(|c| c / len).collect())
        }
    }
}

fn land<T: Scalar>(
    manifold: &ActiveManifold<T>,
    pos: Point<T>,
    query: &Point<T>,
    idx: usize,
    normal: &[T],
    iterations: usize,
    drift: T,
) -> ProjectionResult<T> {
    let pts = manifold.points();
    let params = manifold.params();
    let mut neighbours: Vec<usize> = [idx.checked_sub(1), Some(idx + 1)]
        .into_iter()
        .flatten()
        .filter(|&j| j < pts.len())
        .collect();
    // closer neighbour first; the sort is stable so ties keep the lower index
    neighbours.sort_by(|&a, &b| {
        distance_squared(&pts[a], &pos)
            .partial_cmp(&distance_squared(&pts[b], &pos))
            .expect("finite distances")
    });
    for j in neighbours {
        let (lo, hi) = (idx.min(j), idx.max(j));
        if let Ok(sp) = segment_parameter(&pts[lo], &pts[hi], &pos, normal) {
            let s = params[lo] + sp.t * (params[hi] - params[lo]);
            let landing = pts[lo]
                .iter()
                .zip(pts[hi].iter())
                .map(|(&a, &b)| a + sp.t * (b - a))
                .collect();
            return ProjectionResult {
                query: query.clone(),
                landing_param: s,
                landing_point: Point::new(landing),
                estimate: None,
                iterations,
                drift,
                clamped: sp.clamped,
            };
        }
    }
    // both adjacent segments lie in the level set: land on the vertex
    ProjectionResult {
        query: query.clone(),
        landing_param: params[idx],
        landing_point: pts[idx].clone(),
        estimate: None,
        iterations,
        drift,
        clamped: true,
    }
}

/// Evaluates the surrogate at the landing parameter and stores it.
pub fn estimate_at<T: Scalar>(
    model: &PolynomialSurrogate<T>,
    result: &mut ProjectionResult<T>,
) -> T {
    let v = model.value(result.landing_param);
    result.estimate = Some(v);
    v
}
