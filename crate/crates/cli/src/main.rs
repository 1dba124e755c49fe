use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use amred_core::harness::{monte_carlo_on, write_report_csv, TraversalOverrides};
use amred_core::io::{
    emit_plot_data, load_field_csv, load_manifold_csv, save_field_csv, save_manifold_csv,
    save_subspace_jsonl, save_surrogate_jsonl,
};
use amred_core::{
    build_active_manifold, build_gradient_field, fit_polynomial, AmError, Builtin, Experiment,
    ExperimentSpec, GradientField64, Method, Point64, TraceOptions,
};
use anyhow::Context;
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "amred", version, about = "Active Manifold dimension reduction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a builtin function's gradient field and write it as CSV
    Field(FieldArgs),
    /// Build an active manifold and write it as CSV
    Build(BuildArgs),
    /// Fit a polynomial surrogate to a manifold CSV
    Fit(FitArgs),
    /// Compare AM and AS errors on seeded random queries
    Compare(CompareArgs),
    /// Validate a gradient-field CSV and build a manifold on it
    Ingest(IngestArgs),
}

#[derive(Args)]
struct SourceArgs {
    /// Builtin function id: f1, f2, f3, linear, sphere
    #[arg(long = "fn", value_name = "ID", conflicts_with = "grad")]
    function: Option<Builtin>,
    /// Gradient-field CSV to use instead of a builtin
    #[arg(long, value_name = "FILE")]
    grad: Option<PathBuf>,
    /// Input dimension (builtin default when omitted)
    #[arg(long)]
    dim: Option<usize>,
    /// Grid spacing (builtin default when omitted)
    #[arg(long)]
    spacing: Option<f64>,
}

#[derive(Args)]
struct FieldArgs {
    #[arg(long = "fn", value_name = "ID")]
    function: Builtin,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BuildArgs {
    #[command(flatten)]
    source: SourceArgs,
    /// Comma-separated seed point, default the origin
    #[arg(long, value_name = "X1,..,XN")]
    seed_point: Option<String>,
    /// Trace step, default the grid spacing
    #[arg(long)]
    step: Option<f64>,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct FitArgs {
    #[arg(long)]
    manifold: PathBuf,
    #[arg(long, default_value_t = 5)]
    degree: usize,
    #[arg(long)]
    out: PathBuf,
    /// Also write (s, z, fhat) plot data
    #[arg(long)]
    plot: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    source: SourceArgs,
    #[arg(long, default_value_t = 5)]
    degree: usize,
    #[arg(long, default_value_t = 100)]
    queries: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    folds: usize,
    /// Comma-separated subset of am,as
    #[arg(long, default_value = "am,as")]
    methods: String,
    #[arg(long, value_name = "X1,..,XN")]
    seed_point: Option<String>,
    /// Use exact gradients of the builtin for level-set normals
    #[arg(long)]
    exact_gradients: bool,
    #[arg(long)]
    hit_tol: Option<f64>,
    #[arg(long)]
    traversal_step: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    drift_tol: Option<f64>,
    /// Also write the active subspace model as JSON lines
    #[arg(long)]
    as_model: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    grad: PathBuf,
    #[arg(long, value_name = "X1,..,XN")]
    seed_point: Option<String>,
    #[arg(long, default_value_t = 5)]
    degree: usize,
    #[arg(long)]
    manifold_out: Option<PathBuf>,
    #[arg(long)]
    model_out: Option<PathBuf>,
}

/// Distinguishes bad invocations (exit 1) from numerical failures (exit 2).
enum Failure {
    Usage(anyhow::Error),
    Numerical(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<AmError>() {
            Some(am) if am.is_numerical() => Failure::Numerical(e),
            _ => Failure::Usage(e),
        }
    }
}

impl From<AmError> for Failure {
    fn from(e: AmError) -> Self {
        anyhow::Error::from(e).into()
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(anyhow::anyhow!(msg.into()))
}

fn parse_point(s: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|c| {
            c.trim()
                .parse::<f64>()
                .map_err(|_| usage(format!("bad coordinate `{c}` in `{s}`")))
        })
        .collect()
}

fn seed_point(arg: Option<&str>, dim: usize) -> Result<Point64, Failure> {
    match arg {
        None => Ok(Point64::origin(dim)),
        Some(s) => {
            let v = parse_point(s)?;
            if v.len() != dim {
                return Err(usage(format!(
                    "seed point has {} coordinates, expected {dim}",
                    v.len()
                )));
            }
            Ok(Point64::new(v))
        }
    }
}

fn builtin_dims(b: Builtin, dim: Option<usize>, spacing: Option<f64>) -> (usize, f64) {
    (
        dim.unwrap_or_else(|| b.default_dimension()),
        spacing.unwrap_or_else(|| b.default_spacing()),
    )
}

fn load_source(src: &SourceArgs) -> Result<(GradientField64, Option<Builtin>), Failure> {
    match (&src.function, &src.grad) {
        (Some(b), None) => {
            let (dim, spacing) = builtin_dims(*b, src.dim, src.spacing);
            Ok((build_gradient_field(b, dim, spacing)?, Some(*b)))
        }
        (None, Some(path)) => {
            let field = load_field_csv(path)
                .with_context(|| format!("reading gradient field {}", path.display()))?;
            Ok((field, None))
        }
        _ => Err(usage("exactly one of --fn or --grad is required")),
    }
}

fn cmd_field(a: FieldArgs) -> Result<(), Failure> {
    let (dim, spacing) = builtin_dims(a.function, a.dim, a.spacing);
    let field = build_gradient_field(&a.function, dim, spacing)?;
    save_field_csv(&field, &a.out)?;
    println!("wrote {} samples to {}", field.len(), a.out.display());
    Ok(())
}

fn cmd_build(a: BuildArgs) -> Result<(), Failure> {
    let (field, _) = load_source(&a.source)?;
    let x0 = seed_point(a.seed_point.as_deref(), field.dimension())?;
    let mut opts = TraceOptions::for_field(&field);
    if let Some(s) = a.step {
        opts.step = s;
    }
    if let Some(m) = a.max_steps {
        opts.max_steps = m;
    }
    let m = build_active_manifold(&field, &x0, opts)?;
    save_manifold_csv(&m, &a.out)?;
    let z = m.values();
    println!(
        "manifold: {} points, z from {} to {}; wrote {}",
        m.len(),
        z[0],
        z[z.len() - 1],
        a.out.display()
    );
    Ok(())
}

fn cmd_fit(a: FitArgs) -> Result<(), Failure> {
    let m = load_manifold_csv::<f64>(&a.manifold)
        .with_context(|| format!("reading manifold {}", a.manifold.display()))?;
    let model = fit_polynomial(&m.pairs(), a.degree)?;
    save_surrogate_jsonl(&model, &a.out)?;
    if let Some(plot) = &a.plot {
        emit_plot_data(&m, &model, plot)?;
    }
    println!(
        "degree {} fit over {} pairs, residual_rms {:e}; wrote {}",
        model.degree(),
        m.len(),
        model.residual_rms(),
        a.out.display()
    );
    Ok(())
}

fn cmd_compare(a: CompareArgs) -> Result<(), Failure> {
    let methods = a
        .methods
        .split(',')
        .map(|m| m.parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    if a.folds == 0 {
        return Err(usage("--folds must be at least 1"));
    }
    let (field, builtin) = load_source(&a.source)?;
    if a.exact_gradients && builtin.is_none() {
        return Err(usage("--exact-gradients needs a builtin --fn"));
    }
    let mut spec = ExperimentSpec::new(
        builtin.unwrap_or(Builtin::F1),
        field.spacing(),
        a.degree,
        a.queries,
        a.seed,
    );
    spec.dimension = field.dimension();
    spec.methods = methods;
    spec.exact_normals = a.exact_gradients;
    spec.seed_point = match a.seed_point.as_deref() {
        Some(s) => Some(seed_point(Some(s), field.dimension())?.into_inner()),
        None => None,
    };
    spec.traversal = TraversalOverrides {
        hit_tolerance: a.hit_tol,
        step: a.traversal_step,
        max_iters: a.max_iters,
        drift_tolerance: a.drift_tol,
    };
    spec.validate()?;

    let exp = match &builtin {
        Some(b) => Experiment::from_objective(b, &spec)?,
        None => Experiment::from_field(field, &spec)?,
    };
    let report = monte_carlo_on(&exp, a.folds)?;
    let source = builtin.map_or_else(
        || {
            format!(
                "file:{}",
                a.source
                    .grad
                    .as_ref()
                    .map(|p| p.display().to_string())
                    .unwrap_or_default()
            )
        },
        |b| b.id().to_string(),
    );
    let out = BufWriter::new(
        File::create(&a.out).with_context(|| format!("creating {}", a.out.display()))?,
    );
    write_report_csv(&report, &source, exp.spec(), out)?;
    if let (Some(path), Some(model)) = (&a.as_model, &exp.as_model) {
        save_subspace_jsonl(model, path)?;
    }

    for (k, fold) in report.folds.iter().enumerate() {
        for s in &fold.summaries {
            let mean = s
                .mean_abs_error
                .map_or("n/a".to_string(), |v| format!("{v:.4e}"));
            println!(
                "fold {k} {}: mean |f - fhat| = {mean} ({} ok, {} failed)",
                s.method, s.successes, s.failures
            );
        }
    }
    for (m, v) in &report.fold_means {
        let mean = v.map_or("n/a".to_string(), |v| format!("{v:.4e}"));
        println!("{m} fold mean: {mean}");
    }
    println!("wrote {}", a.out.display());
    Ok(())
}

fn cmd_ingest(a: IngestArgs) -> Result<(), Failure> {
    let field: GradientField64 = load_field_csv(&a.grad)
        .with_context(|| format!("reading gradient field {}", a.grad.display()))?;
    let flagged = field.samples().filter(|s| s.zero_gradient).count();
    println!(
        "field: dim={} spacing={} samples={} zero-gradient={}",
        field.dimension(),
        field.spacing(),
        field.len(),
        flagged
    );
    let x0 = seed_point(a.seed_point.as_deref(), field.dimension())?;
    let m = build_active_manifold(&field, &x0, TraceOptions::for_field(&field))?;
    let model = fit_polynomial(&m.pairs(), a.degree)?;
    println!(
        "manifold: {} points; degree {} residual_rms {:e}",
        m.len(),
        model.degree(),
        model.residual_rms()
    );
    if let Some(p) = &a.manifold_out {
        save_manifold_csv(&m, p)?;
    }
    if let Some(p) = &a.model_out {
        save_surrogate_jsonl(&model, p)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Field(a) => cmd_field(a),
        Command::Build(a) => cmd_build(a),
        Command::Fit(a) => cmd_fit(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Ingest(a) => cmd_ingest(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Numerical(e)) => {
            eprintln!("numerical failure: {e:#}");
            ExitCode::from(2)
        }
    }
}
