//! Seeded experiment runner comparing Active Manifold and Active Subspace
//! estimates on random queries.
//!
//! Queries are drawn from `xoshiro256++` seeded through `SplitMix64`
//! (`Xoshiro256PlusPlus::seed_from_u64`); each coordinate is
//! `2 u - 1` with `u` the standard 53-bit uniform double in `[0, 1)`.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;

use crate::error::{AmError, Result};
use crate::geometry::{build_gradient_field, GradientField, Point};
use crate::io::fmt_real;
use crate::levelset::{traverse_with, NormalSource, TraversalConfig, TraversalFailure};
use crate::manifold::{build_active_manifold, ActiveManifold, TraceOptions};
use crate::objective::{Builtin, Objective};
use crate::scalar::Scalar;
use crate::subspace::{as_estimate, build_as_model_from_field, ActiveSubspaceModel};
use crate::surrogate::{fit_polynomial, PolynomialSurrogate};

pub const RNG_NAME: &str = "xoshiro256++";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    ActiveManifold,
    ActiveSubspace,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::ActiveManifold => "AM",
            Method::ActiveSubspace => "AS",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Method {
    type Err = AmError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "am" => Ok(Method::ActiveManifold),
            "as" => Ok(Method::ActiveSubspace),
            other => Err(AmError::InvalidConfig(format!("unknown method `{other}`"))),
        }
    }
}

/// Optional replacements for the traversal defaults.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct TraversalOverrides {
    pub hit_tolerance: Option<f64>,
    pub step: Option<f64>,
    pub max_iters: Option<usize>,
    pub drift_tolerance: Option<f64>,
}

impl TraversalOverrides {
    fn apply<T: Scalar>(&self, mut cfg: TraversalConfig<T>) -> TraversalConfig<T> {
        if let Some(v) = self.hit_tolerance {
            cfg.hit_tolerance = T::lit(v);
        }
        if let Some(v) = self.step {
            cfg.step = T::lit(v);
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.drift_tolerance {
            cfg.drift_tolerance = T::lit(v);
        }
        cfg
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub function: Builtin,
    pub dimension: usize,
    pub spacing: f64,
    pub surrogate_degree: usize,
    pub n_queries: usize,
    pub rng_seed: u64,
    /// Defaults to the domain center.
    pub seed_point: Option<Vec<f64>>,
    pub traversal: TraversalOverrides,
    pub methods: Vec<Method>,
    /// Use exact gradients of the objective for the level-set normals.
    pub exact_normals: bool,
}

impl ExperimentSpec {
    /// Both methods, center seed point, default traversal.
    pub fn new(
        function: Builtin,
        spacing: f64,
        surrogate_degree: usize,
        n_queries: usize,
        rng_seed: u64,
    ) -> Self {
        ExperimentSpec {
            function,
            dimension: function.default_dimension(),
            spacing,
            surrogate_degree,
            n_queries,
            rng_seed,
            seed_point: None,
            traversal: TraversalOverrides::default(),
            methods: vec![Method::ActiveManifold, Method::ActiveSubspace],
            exact_normals: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_queries == 0 {
            return Err(AmError::InvalidConfig(
                "n_queries must be at least 1".into(),
            ));
        }
        if !(self.spacing > 0.0) {
            return Err(AmError::InvalidSpacing(self.spacing));
        }
        if self.methods.is_empty() {
            return Err(AmError::InvalidConfig(
                "at least one method is required".into(),
            ));
        }
        if let Some(x0) = &self.seed_point {
            if x0.len() != self.dimension {
                return Err(AmError::DimensionMismatch {
                    expected: self.dimension,
                    found: x0.len(),
                });
            }
        }
        Ok(())
    }

    fn has(&self, m: Method) -> bool {
        self.methods.contains(&m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QueryStatus {
    Ok,
    /// AM landing parameter was clamped onto the segment.
    Clamped,
    /// AS projection fell outside the surrogate's training interval.
    Extrapolated,
    Failed(TraversalFailure),
    /// A non-traversal numerical error.
    Error,
}

impl QueryStatus {
    pub fn label(self) -> &'static str {
        match self {
            QueryStatus::Ok => "ok",
            QueryStatus::Clamped => "ok_clamped",
            QueryStatus::Extrapolated => "ok_extrapolated",
            QueryStatus::Failed(f) => f.label(),
            QueryStatus::Error => "error",
        }
    }

    pub fn is_success(self) -> bool {
        matches!(
            self,
            QueryStatus::Ok | QueryStatus::Clamped | QueryStatus::Extrapolated
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord<T> {
    pub method: Method,
    pub index: usize,
    pub query: Point<T>,
    /// Manifold parameter (AM) or active coordinate (AS).
    pub s_star: Option<T>,
    pub estimate: Option<T>,
    pub truth: T,
    pub abs_error: Option<T>,
    pub iterations: usize,
    pub drift: T,
    pub status: QueryStatus,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary<T> {
    pub method: Method,
    /// Mean over successful queries; `None` when every query failed.
    pub mean_abs_error: Option<T>,
    pub successes: usize,
    pub failures: usize,
    /// Successful queries carrying a clamp or extrapolation flag.
    pub flagged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport<T> {
    pub seed: u64,
    pub summaries: Vec<MethodSummary<T>>,
    /// Ordered by method, then query index.
    pub records: Vec<QueryRecord<T>>,
}

impl<T: Scalar> ErrorReport<T> {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary<T>> {
        self.summaries.iter().find(|s| s.method == method)
    }

    pub fn mean_error(&self, method: Method) -> Option<T> {
        self.summary(method).and_then(|s| s.mean_abs_error)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonteCarloReport<T> {
    pub folds: Vec<ErrorReport<T>>,
    /// Mean over folds of each method's mean error.
    pub fold_means: Vec<(Method, Option<T>)>,
}

impl<T: Scalar> MonteCarloReport<T> {
    pub fn fold_mean(&self, method: Method) -> Option<T> {
        self.fold_means
            .iter()
            .find(|(m, _)| *m == method)
            .and_then(|(_, v)| *v)
    }
}

/// `n` uniform points of `[-1,1]^dimension` from the given seed.
pub fn draw_queries<T: Scalar>(seed: u64, n: usize, dimension: usize) -> Vec<Point<T>> {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            Point::new(
                (0..dimension)
                    .map(|_| T::lit(2.0 * rng.gen::<f64>() - 1.0))
                    .collect(),
            )
        })
        .collect()
}

/// Seed of fold `k`; fold 0 uses the base seed itself.
pub fn fold_seed(base: u64, fold: usize) -> u64 {
    if fold == 0 {
        return base;
    }
    // SplitMix64 finalizer over the golden-ratio stride
    let mut z = base.wrapping_add((fold as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Everything built once per experiment and shared by all queries.
pub struct Experiment<'a, T: Scalar> {
    pub field: GradientField<T>,
    pub manifold: Option<ActiveManifold<T>>,
    pub am_surrogate: Option<PolynomialSurrogate<T>>,
    pub as_model: Option<ActiveSubspaceModel<T>>,
    pub traversal: Option<TraversalConfig<T>>,
    objective: Option<&'a dyn Objective<T>>,
    exact_normals: bool,
    spec: ExperimentSpec,
}

impl<'a, T: Scalar> Experiment<'a, T> {
    /// Samples `objective` on the grid and builds the requested models.
    /// Truth values come from direct evaluation.
    pub fn from_objective(objective: &'a dyn Objective<T>, spec: &ExperimentSpec) -> Result<Self> {
        spec.validate()?;
        let field = build_gradient_field(objective, spec.dimension, T::lit(spec.spacing))?;
        Self::assemble(field, Some(objective), spec)
    }

    /// Builds the models on a pre-sampled field. Truth values are the
    /// nearest sample values, an approximation.
    pub fn from_field(field: GradientField<T>, spec: &ExperimentSpec) -> Result<Self> {
        let mut spec = spec.clone();
        spec.dimension = field.dimension();
        spec.spacing = field.spacing().as_f64();
        spec.exact_normals = false;
        spec.validate()?;
        Self::assemble(field, None, &spec)
    }

    fn assemble(
        field: GradientField<T>,
        objective: Option<&'a dyn Objective<T>>,
        spec: &ExperimentSpec,
    ) -> Result<Self> {
        let (manifold, am_surrogate, traversal) = if spec.has(Method::ActiveManifold) {
            let x0 = match &spec.seed_point {
                Some(v) => Point::new(v.iter().map(|&c| T::lit(c)).collect()),
                None => Point::origin(field.dimension()),
            };
            let m = build_active_manifold(&field, &x0, TraceOptions::for_field(&field))?;
            let fit = fit_polynomial(&m.pairs(), spec.surrogate_degree)?;
            let cfg = spec
                .traversal
                .apply(TraversalConfig::defaults_for(&field, &m));
            cfg.validate(field.spacing())?;
            (Some(m), Some(fit), Some(cfg))
        } else {
            (None, None, None)
        };
        let as_model = if spec.has(Method::ActiveSubspace) {
            Some(build_as_model_from_field(&field, spec.surrogate_degree)?)
        } else {
            None
        };
        Ok(Experiment {
            field,
            manifold,
            am_surrogate,
            as_model,
            traversal,
            objective,
            exact_normals: spec.exact_normals,
            spec: spec.clone(),
        })
    }

    pub fn spec(&self) -> &ExperimentSpec {
        &self.spec
    }

    fn truth(&self, p: &Point<T>) -> T {
        match self.objective {
            Some(obj) => obj.value(p),
            None => self.field.nearest_value(p),
        }
    }

    fn am_query(&self, index: usize, p: &Point<T>, truth: T) -> Option<QueryRecord<T>> {
        let (m, fit, cfg) = (
            self.manifold.as_ref()?,
            self.am_surrogate.as_ref()?,
            self.traversal.as_ref()?,
        );
        let normals = match (self.exact_normals, self.objective) {
            (true, Some(obj)) => NormalSource::Exact(obj),
            _ => NormalSource::Field,
        };
        let mut rec = QueryRecord {
            method: Method::ActiveManifold,
            index,
            query: p.clone(),
            s_star: None,
            estimate: None,
            truth,
            abs_error: None,
            iterations: 0,
            drift: T::zero(),
            status: QueryStatus::Error,
        };
        match traverse_with(&self.field, m, p, cfg, normals, None) {
            Ok(r) => {
                let est = fit.value(r.landing_param);
                rec.s_star = Some(r.landing_param);
                rec.estimate = Some(est);
                rec.abs_error = Some((est - truth).abs());
                rec.iterations = r.iterations;
                rec.drift = r.drift;
                rec.status = if r.clamped {
                    QueryStatus::Clamped
                } else {
                    QueryStatus::Ok
                };
            }
            Err(AmError::Traversal(e)) => {
                rec.iterations = e.iterations;
                rec.drift = T::lit(e.drift);
                rec.status = QueryStatus::Failed(e.failure);
            }
            Err(_) => {}
        }
        Some(rec)
    }

    fn as_query(&self, index: usize, p: &Point<T>, truth: T) -> Option<QueryRecord<T>> {
        let model = self.as_model.as_ref()?;
        let proj = model.project(p);
        let est = as_estimate(model, p);
        Some(QueryRecord {
            method: Method::ActiveSubspace,
            index,
            query: p.clone(),
            s_star: Some(proj),
            estimate: Some(est.value),
            truth,
            abs_error: Some((est.value - truth).abs()),
            iterations: 0,
            drift: T::zero(),
            status: if est.extrapolated {
                QueryStatus::Extrapolated
            } else {
                QueryStatus::Ok
            },
        })
    }

    /// Draws `n_queries` points from `seed` and estimates each with every
    /// requested method. Queries run in parallel; output order is fixed.
    pub fn run_queries(&self, seed: u64) -> ErrorReport<T> {
        let queries = draw_queries::<T>(seed, self.spec.n_queries, self.field.dimension());
        let per_query: Vec<(_, _)> = queries
            .par_iter()
            .enumerate()
            .map(|(i, p)| {
                let truth = self.truth(p);
                (self.am_query(i, p, truth), self.as_query(i, p, truth))
            })
            .collect();
        let (am, as_): (Vec<_>, Vec<_>) = per_query.into_iter().unzip();
        let mut records = Vec::with_capacity(self.spec.n_queries * 2);
        let mut summaries = Vec::new();
        for (method, recs) in [(Method::ActiveManifold, am), (Method::ActiveSubspace, as_)] {
            let recs: Vec<QueryRecord<T>> = recs.into_iter().flatten().collect();
            if recs.is_empty() {
                continue;
            }
            summaries.push(summarize(method, &recs));
            records.extend(recs);
        }
        ErrorReport {
            seed,
            summaries,
            records,
        }
    }
}

fn summarize<T: Scalar>(method: Method, recs: &[QueryRecord<T>]) -> MethodSummary<T> {
    let ok: Vec<&QueryRecord<T>> = recs.iter().filter(|r| r.status.is_success()).collect();
    let mean = (!ok.is_empty()).then(|| {
        ok.iter()
            .map(|r| r.abs_error.expect("successful query has an error"))
            .sum::<T>()
            / T::from_index(ok.len())
    });
    MethodSummary {
        method,
        mean_abs_error: mean,
        successes: ok.len(),
        failures: recs.len() - ok.len(),
        flagged: ok.iter().filter(|r| r.status != QueryStatus::Ok).count(),
    }
}

/// Builds the models for `spec.function`, then estimates seeded queries.
pub fn run_experiment<T: Scalar>(spec: &ExperimentSpec) -> Result<ErrorReport<T>> {
    let objective = spec.function;
    let exp = Experiment::<T>::from_objective(&objective, spec)?;
    Ok(exp.run_queries(spec.rng_seed))
}

/// Repeats the query stage for `folds` independent seeds derived from
/// `spec.rng_seed`; fold 0 reproduces [`run_experiment`].
pub fn monte_carlo<T: Scalar>(spec: &ExperimentSpec, folds: usize) -> Result<MonteCarloReport<T>> {
    let objective = spec.function;
    let exp = Experiment::<T>::from_objective(&objective, spec)?;
    monte_carlo_on(&exp, folds)
}

pub fn monte_carlo_on<T: Scalar>(
    exp: &Experiment<'_, T>,
    folds: usize,
) -> Result<MonteCarloReport<T>> {
    if folds == 0 {
        return Err(AmError::InvalidConfig("folds must be at least 1".into()));
    }
    let folds: Vec<ErrorReport<T>> = (0..folds)
        .map(|k| exp.run_queries(fold_seed(exp.spec().rng_seed, k)))
        .collect();
    let mut fold_means = Vec::new();
    for method in [Method::ActiveManifold, Method::ActiveSubspace] {
        if !exp.spec().has(method) {
            continue;
        }
        let means: Option<Vec<T>> = folds.iter().map(|f| f.mean_error(method)).collect();
        let mean = means.map(|v| v.iter().copied().sum::<T>() / T::from_index(v.len()));
        fold_means.push((method, mean));
    }
    Ok(MonteCarloReport { folds, fold_means })
}

fn opt_real<T: Scalar>(v: Option<T>) -> String {
    v.map(fmt_real).unwrap_or_default()
}

/// Writes a comparison report: a `#` header naming the source and seed, one
/// row per fold, method and query, and `# summary` lines.
pub fn write_report_csv<T: Scalar, W: Write>(
    report: &MonteCarloReport<T>,
    source: &str,
    spec: &ExperimentSpec,
    mut out: W,
) -> Result<()> {
    writeln!(
        out,
        "# amred compare source={} dim={} spacing={} degree={} queries={} seed={} folds={} rng={}",
        source,
        spec.dimension,
        spec.spacing,
        spec.surrogate_degree,
        spec.n_queries,
        spec.rng_seed,
        report.folds.len(),
        RNG_NAME
    )?;
    let xs: Vec<String> = (1..=spec.dimension).map(|i| format!("x{i}")).collect();
    writeln!(
        out,
        "fold,method,query,{},s_star,estimate,true_value,abs_error,iterations,drift,status",
        xs.join(",")
    )?;
    for (k, fold) in report.folds.iter().enumerate() {
        for r in &fold.records {
            let coords: Vec<String> = r.query.iter().map(|&c| fmt_real(c)).collect();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                k,
                r.method,
                r.index,
                coords.join(","),
                opt_real(r.s_star),
                opt_real(r.estimate),
                fmt_real(r.truth),
                opt_real(r.abs_error),
                r.iterations,
                fmt_real(r.drift),
                r.status.label()
            )?;
        }
    }
    for (k, fold) in report.folds.iter().enumerate() {
        for s in &fold.summaries {
            writeln!(
                out,
                "# summary fold={} seed={} method={} mean_abs_error={} successes={} failures={} flagged={}",
                k,
                fold.seed,
                s.method,
                opt_real(s.mean_abs_error),
                s.successes,
                s.failures,
                s.flagged
            )?;
        }
    }
    for (m, v) in &report.fold_means {
        writeln!(
            out,
            "# fold_mean method={} mean_abs_error={}",
            m,
            opt_real(*v)
        )?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn queries_are_reproducible_and_in_domain() {
        let a = draw_queries::<f64>(42, 50, 3);
        let b = draw_queries::<f64>(42, 50, 3);
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p.iter().all(|c| (-1.0..1.0).contains(c))));
        assert_ne!(a, draw_queries::<f64>(43, 50, 3));
    }

    #[test]
    fn fold_seeds_are_distinct() {
        let seeds: Vec<u64> = (0..8).map(|k| fold_seed(42, k)).collect();
        assert_eq!(seeds[0], 42);
        let mut sorted = seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        assert_eq!(sorted.len(), 8);
    }

    #[test]
    fn spec_validation() {
        let mut spec = ExperimentSpec::new(Builtin::F1, 0.05, 4, 0, 1);
        assert!(spec.validate().is_err());
        spec.n_queries = 5;
        spec.methods.clear();
        assert!(spec.validate().is_err());
        spec.methods = vec![Method::ActiveSubspace];
        spec.seed_point = Some(vec![0.0]);
        assert!(spec.validate().is_err());
    }

    #[test]
    fn failures_are_accounted() {
        let spec = ExperimentSpec::new(Builtin::F2, 0.1, 5, 40, 3);
        let report = run_experiment::<f64>(&spec).unwrap();
        for s in &report.summaries {
            assert_eq!(s.successes + s.failures, 40);
        }
        assert_eq!(report.records.len(), 80);
    }

    #[test]
    fn single_method() {
        let mut spec = ExperimentSpec::new(Builtin::F1, 0.1, 4, 10, 3);
        spec.methods = vec![Method::ActiveSubspace];
        let report = run_experiment::<f64>(&spec).unwrap();
        assert_eq!(report.summaries.len(), 1);
        assert!(report.mean_error(Method::ActiveManifold).is_none());
    }

    #[test]
    fn method_parsing() {
        assert_eq!("AM".parse::<Method>().unwrap(), Method::ActiveManifold);
        assert_eq!("as".parse::<Method>().unwrap(), Method::ActiveSubspace);
        assert!("pca".parse::<Method>().is_err());
    }
}
