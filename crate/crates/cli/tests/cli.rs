use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use amred_core::io::read_surrogate_jsonl;
use amred_core::PolynomialSurrogate64;

fn amred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_amred"))
        .args(args)
        .output()
        .expect("spawn amred")
}

fn scratch(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"))
        .join("cli")
        .join(name);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn build_fit_and_plot() {
    let dir = scratch("build_fit");
    let manifold = dir.join("manifold.csv");
    let model = dir.join("model.jsonl");
    let plot = dir.join("plot.csv");

    let out = amred(&[
        "build",
        "--fn",
        "f2",
        "--spacing",
        "0.05",
        "--seed-point",
        "0,0",
        "--out",
        s(&manifold),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&manifold).unwrap();
    assert!(text.starts_with("dim=2\n"));

    let out = amred(&[
        "fit",
        "--manifold",
        s(&manifold),
        "--degree",
        "5",
        "--out",
        s(&model),
        "--plot",
        s(&plot),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let fit: PolynomialSurrogate64 =
        read_surrogate_jsonl(std::fs::File::open(&model).unwrap()).unwrap();
    assert_eq!(fit.degree(), 5);
    let rows = std::fs::read_to_string(&plot).unwrap().lines().count() - 1;
    assert_eq!(rows, text.lines().count() - 1);
}

#[test]
fn exported_field_feeds_ingest_and_compare() {
    let dir = scratch("ingest");
    let field = dir.join("field.csv");
    let manifold = dir.join("manifold.csv");
    let report = dir.join("report.csv");

    let out = amred(&[
        "field",
        "--fn",
        "f1",
        "--spacing",
        "0.1",
        "--out",
        s(&field),
    ]);
    assert!(out.status.success());
    let out = amred(&[
        "ingest",
        "--grad",
        s(&field),
        "--degree",
        "4",
        "--manifold-out",
        s(&manifold),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(String::from_utf8_lossy(&out.stdout).contains("samples=441"));

    let out = amred(&[
        "compare",
        "--grad",
        s(&field),
        "--degree",
        "4",
        "--queries",
        "20",
        "--out",
        s(&report),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(&report).unwrap();
    assert!(text.lines().next().unwrap().contains("source=file:"));
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = scratch("usage");
    let out = amred(&["compare", "--fn", "f9", "--out", s(&dir.join("r.csv"))]);
    assert_eq!(out.status.code(), Some(1));
    let out = amred(&[
        "compare",
        "--fn",
        "f1",
        "--folds",
        "0",
        "--out",
        s(&dir.join("r.csv")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = amred(&[
        "fit",
        "--manifold",
        s(&dir.join("missing.csv")),
        "--out",
        s(&dir.join("m.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let manifold = dir.join("m.csv");
    assert!(amred(&[
        "build",
        "--fn",
        "f1",
        "--spacing",
        "0.1",
        "--out",
        s(&manifold)
    ])
    .status
    .success());
    let out = amred(&[
        "fit",
        "--manifold",
        s(&manifold),
        "--out",
        s(&dir.join("m.jsonl")),
        "--plot",
        "",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = amred(&["build"]);
    assert_eq!(out.status.code(), Some(1));
    let out = amred(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = scratch("numerical");
    let out = amred(&[
        "build",
        "--fn",
        "sphere",
        "--dim",
        "2",
        "--spacing",
        "0.1",
        "--seed-point",
        "0,0",
        "--out",
        s(&dir.join("m.csv")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let out = amred(&[
        "compare",
        "--fn",
        "f2",
        "--spacing",
        "0.5",
        "--degree",
        "11",
        "--out",
        s(&dir.join("r.csv")),
    ]);
    assert_eq!(
        out.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}
