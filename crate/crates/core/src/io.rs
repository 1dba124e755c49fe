//! Text formats: gradient-field CSV, manifold CSV, surrogate and subspace
//! JSON lines, and plot data.
//!
//! Reals are written with 17 significant digits so `f64` values survive a
//! round trip bit for bit.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{AmError, Result};
use crate::geometry::{GradientField, Lattice, Point};
use crate::manifold::ActiveManifold;
use crate::scalar::Scalar;
use crate::subspace::{ActiveSubspaceModel, SubspaceRecord};
use crate::surrogate::{PolynomialSurrogate, SurrogateRecord};

/// Tolerance for matching ingested locations against the lattice.
pub const LATTICE_MATCH_TOL: f64 = 1e-12;

pub(crate) fn fmt_real<T: Scalar>(x: T) -> String {
    format!("{:.16e}", x.as_f64())
}

fn parse_real<T: Scalar>(s: &str, line: usize) -> Result<T> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| AmError::format(line, format!("not a number: `{}`", s.trim())))?;
    T::from_f64(v).ok_or_else(|| AmError::format(line, "value out of range"))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if path.as_os_str().is_empty() {
        return Err(AmError::InvalidConfig("empty output path".into()));
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn header_fields(line: &str, lineno: usize) -> Result<Vec<(String, String)>> {
    line.split(',')
        .map(|kv| {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| AmError::format(lineno, format!("malformed header entry `{kv}`")))?;
            Ok((k.trim().to_string(), v.trim().to_string()))
        })
        .collect()
}

fn header_value<'a>(fields: &'a [(String, String)], key: &str, lineno: usize) -> Result<&'a str> {
    fields
        .iter()
        .find(|(k, _)| k == key)
        .map(|(_, v)| v.as_str())
        .ok_or_else(|| AmError::format(lineno, format!("header is missing `{key}`")))
}

/// Writes `dim=<n>,spacing=<eps>` then one `x..., g..., f` row per sample in
/// lattice order. Gradients are the raw (unnormalized) ones.
pub fn write_field_csv<T: Scalar, W: Write>(field: &GradientField<T>, mut out: W) -> Result<()> {
    let n = field.dimension();
    writeln!(out, "dim={},spacing={}", n, field.spacing().as_f64())?;
    let mut row = String::new();
    for i in 0..field.len() {
        row.clear();
        let loc = field.lattice().location(i);
        for c in loc.iter().chain(field.gradient(i)) {
            row.push_str(&fmt_real(*c));
            row.push(',');
        }
        row.push_str(&fmt_real(field.value(i)));
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_field_csv<T: Scalar>(field: &GradientField<T>, path: impl AsRef<Path>) -> Result<()> {
    write_field_csv(field, create(path.as_ref())?)
}

/// Reads a gradient-field CSV, checking the header, row widths, row count
/// and that every location sits on the lattice in order.
pub fn read_field_csv<T: Scalar, R: Read>(input: R) -> Result<GradientField<T>> {
    let mut lines = BufReader::new(input).lines().enumerate();
    let header = loop {
        match lines.next() {
            Some((_, l)) => {
                let l = l?;
                if !l.trim().is_empty() {
                    break l;
                }
            }
            None => return Err(AmError::format(1, "missing header")),
        }
    };
    let fields = header_fields(&header, 1)?;
    let n: usize = header_value(&fields, "dim", 1)?
        .parse()
        .map_err(|_| AmError::format(1, "dim is not a positive integer"))?;
    let spacing: T = parse_real(header_value(&fields, "spacing", 1)?, 1)?;
    let lattice = Lattice::new(n, spacing)?;

    let width = 2 * n + 1;
    let mut values = Vec::with_capacity(lattice.len());
    let mut gradients = Vec::with_capacity(lattice.len() * n);
    let tol = T::lit(LATTICE_MATCH_TOL);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != width {
            return Err(AmError::format(
                lineno,
                format!("expected {width} columns for dim={n}, found {}", cols.len()),
            ));
        }
        let row = values.len();
        if row >= lattice.len() {
            return Err(AmError::format(
                lineno,
                format!("more rows than the {} lattice points", lattice.len()),
            ));
        }
        let expected = lattice.location(row);
        for (k, c) in cols[..n].iter().enumerate() {
            let x: T = parse_real(c, lineno)?;
            if (x - expected[k]).abs() > tol {
                return Err(AmError::format(
                    lineno,
                    format!("location is not lattice point {row} in row-major order"),
                ));
            }
        }
        for c in &cols[n..2 * n] {
            gradients.push(parse_real(c, lineno)?);
        }
        values.push(parse_real(cols[2 * n], lineno)?);
    }
    if values.len() != lattice.len() {
        return Err(AmError::format(
            values.len() + 1,
            format!("found {} rows, expected {}", values.len(), lattice.len()),
        ));
    }
    GradientField::from_samples(lattice, values, gradients)
}

pub fn load_field_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<GradientField<T>> {
    read_field_csv(File::open(path)?)
}

/// Writes `dim=<n>` then `s,z,x1..xn` rows in ascending `s`.
pub fn write_manifold_csv<T: Scalar, W: Write>(m: &ActiveManifold<T>, mut out: W) -> Result<()> {
    writeln!(out, "dim={}", m.dimension())?;
    for ((p, &s), &z) in m.points().iter().zip(m.params()).zip(m.values()) {
        let mut row = format!("{},{}", fmt_real(s), fmt_real(z));
        for &c in p.iter() {
            row.push(',');
            row.push_str(&fmt_real(c));
        }
        writeln!(out, "{row}")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_manifold_csv<T: Scalar>(m: &ActiveManifold<T>, path: impl AsRef<Path>) -> Result<()> {
    write_manifold_csv(m, create(path.as_ref())?)
}

/// Reads a manifold CSV. The seed point is not stored in the file; the
/// vertex nearest the middle of the parameter range stands in for it.
pub fn read_manifold_csv<T: Scalar, R: Read>(input: R) -> Result<ActiveManifold<T>> {
    let mut lines = BufReader::new(input).lines();
    let header = lines
        .next()
        .ok_or_else(|| AmError::format(1, "missing header"))??;
    let fields = header_fields(&header, 1)?;
    let n: usize = header_value(&fields, "dim", 1)?
        .parse()
        .map_err(|_| AmError::format(1, "dim is not a positive integer"))?;
    let (mut points, mut params, mut values) = (Vec::new(), Vec::new(), Vec::new());
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != n + 2 {
            return Err(AmError::format(
                lineno,
                format!(
                    "expected {} columns for dim={n}, found {}",
                    n + 2,
                    cols.len()
                ),
            ));
        }
        params.push(parse_real::<T>(cols[0], lineno)?);
        values.push(parse_real::<T>(cols[1], lineno)?);
        let coords = cols[2..]
            .iter()
            .map(|c| parse_real(c, lineno))
            .collect::<Result<Vec<T>>>()?;
        points.push(Point::new(coords));
    }
    let seed = points
        .get(points.len() / 2)
        .cloned()
        .ok_or(AmError::DegenerateManifold)?;
    ActiveManifold::from_parts(points, params, values, seed)
}

pub fn load_manifold_csv<T: Scalar>(path: impl AsRef<Path>) -> Result<ActiveManifold<T>> {
    read_manifold_csv(File::open(path)?)
}

pub fn write_surrogate_jsonl<T: Scalar, W: Write>(
    model: &PolynomialSurrogate<T>,
    mut out: W,
) -> Result<()> {
    serde_json::to_writer(&mut out, &SurrogateRecord::from(model))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn save_surrogate_jsonl<T: Scalar>(
    model: &PolynomialSurrogate<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_surrogate_jsonl(model, create(path.as_ref())?)
}

/// Reads the first record of a surrogate JSON-lines file.
pub fn read_surrogate_jsonl<T: Scalar, R: Read>(input: R) -> Result<PolynomialSurrogate<T>> {
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SurrogateRecord =
            serde_json::from_str(&line).map_err(|e| AmError::format(idx + 1, e.to_string()))?;
        return rec.to_surrogate();
    }
    Err(AmError::format(1, "no surrogate record"))
}

pub fn write_subspace_jsonl<T: Scalar, W: Write>(
    model: &ActiveSubspaceModel<T>,
    mut out: W,
) -> Result<()> {
    serde_json::to_writer(&mut out, &SubspaceRecord::from(model))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

pub fn save_subspace_jsonl<T: Scalar>(
    model: &ActiveSubspaceModel<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_subspace_jsonl(model, create(path.as_ref())?)
}

/// Writes `s,z,fhat` rows, one per manifold vertex.
pub fn write_plot_data<T: Scalar, W: Write>(
    m: &ActiveManifold<T>,
    model: &PolynomialSurrogate<T>,
    mut out: W,
) -> Result<()> {
    writeln!(out, "s,z,fhat")?;
    for (&s, &z) in m.params().iter().zip(m.values()) {
        writeln!(
            out,
            "{},{},{}",
            fmt_real(s),
            fmt_real(z),
            fmt_real(model.value(s))
        )?;
    }
    out.flush()?;
    Ok(())
}

/// [`write_plot_data`] to a file; an empty path is a usage error.
pub fn emit_plot_data<T: Scalar>(
    m: &ActiveManifold<T>,
    model: &PolynomialSurrogate<T>,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_plot_data(m, model, create(path.as_ref())?)
}
