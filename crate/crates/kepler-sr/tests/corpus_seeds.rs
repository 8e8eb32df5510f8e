//! Runs every checked-in fuzz corpus seed through the code path its fuzz
//! target exercises, so the seeds stay valid as the parsers evolve and the
//! harness behavior is covered even where cargo-fuzz is unavailable.

use std::fs;
use std::path::{Path, PathBuf};

use kepler_sr::dataset::{load_dataset_str, parse_dms};
use kepler_sr::expr::parse::parse;
use kepler_sr::expr::print::to_text;
use kepler_sr::expr::{evaluate, Expr};

fn corpus_dir(target: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target)
}

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = corpus_dir(target);
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("missing corpus dir {}: {e}", dir.display()))
        .map(|entry| {
            let entry = entry.unwrap();
            let name = entry.file_name().to_string_lossy().into_owned();
            (name, fs::read(entry.path()).unwrap())
        })
        .collect();
    assert!(!out.is_empty(), "corpus for {target} has no seeds");
    out.sort();
    out
}

fn probe_columns(expr: &Expr) -> Option<Vec<Vec<f64>>> {
    let arity = match expr.max_feature_index() {
        None => 0,
        Some(i) if i < 8 => i + 1,
        Some(_) => return None,
    };
    let base = [-2.0, -0.5, 0.0, 0.3, 1.0, 1.7, 2.5, -1.2, 0.9];
    Some(
        (0..arity)
            .map(|j| base.iter().map(|v| v * (j as f64 + 1.0)).collect())
            .collect(),
    )
}

fn agree(a: f64, b: f64) -> bool {
    a == b || (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0) || (a.is_nan() && b.is_nan())
}

/// Sugar operators print as compound forms (`square` as `^2`, `inv` as
/// `1/..`), so the reparsed tree may have a different shape; the round-trip
/// contract is that printing is a fixed point and evaluation agrees.
#[test]
fn parse_expr_seeds_run_the_fuzz_property() {
    for (name, bytes) in seeds("fuzz_parse_expr") {
        let Ok(text) = std::str::from_utf8(&bytes) else {
            panic!("seed {name} is not UTF-8");
        };
        let Ok((expr, constants)) = parse(text) else {
            continue;
        };
        let printed = to_text(&expr, &constants);
        let (expr2, constants2) = parse(&printed)
            .unwrap_or_else(|e| panic!("seed {name}: printed `{printed}` does not reparse: {e}"));
        assert_eq!(
            printed,
            to_text(&expr2, &constants2),
            "seed {name}: printing is not a fixed point"
        );
        if let Some(columns) = probe_columns(&expr) {
            let first = evaluate(&expr, &constants, &columns).unwrap();
            let second = evaluate(&expr2, &constants2, &columns).unwrap();
            for (a, b) in first.iter().zip(&second) {
                assert!(agree(*a, *b), "seed {name}: `{printed}` gives {a} vs {b}");
            }
        }
    }
}

#[test]
fn parse_dms_seeds_run_the_fuzz_property() {
    for (name, bytes) in seeds("fuzz_parse_dms") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if let Ok(degrees) = parse_dms(text) {
            assert!(degrees.is_finite(), "seed {name} produced {degrees}");
        }
    }
}

#[test]
fn ingest_csv_seeds_run_the_fuzz_property() {
    for (name, bytes) in seeds("fuzz_ingest_csv") {
        let text = std::str::from_utf8(&bytes).unwrap();
        if let Ok(dataset) = load_dataset_str(text) {
            for sample in &dataset.samples {
                assert!(sample.theta.is_finite(), "seed {name}");
                assert!(sample.theta <= std::f64::consts::PI, "seed {name}");
                assert!(sample.theta > -std::f64::consts::PI, "seed {name}");
                assert!(sample.r.is_finite() && sample.r > 0.0, "seed {name}");
            }
        }
    }
}

/// The corpus must exercise both accepting and rejecting paths.
#[test]
fn corpus_covers_accept_and_reject() {
    let expr: Vec<bool> = seeds("fuzz_parse_expr")
        .iter()
        .map(|(_, b)| parse(std::str::from_utf8(b).unwrap()).is_ok())
        .collect();
    assert!(expr.iter().any(|&ok| ok) && expr.iter().any(|&ok| !ok));

    let dms: Vec<bool> = seeds("fuzz_parse_dms")
        .iter()
        .map(|(_, b)| parse_dms(std::str::from_utf8(b).unwrap()).is_ok())
        .collect();
    assert!(dms.iter().any(|&ok| ok) && dms.iter().any(|&ok| !ok));

    let csv: Vec<bool> = seeds("fuzz_ingest_csv")
        .iter()
        .map(|(_, b)| load_dataset_str(std::str::from_utf8(b).unwrap()).is_ok())
        .collect();
    assert!(csv.iter().any(|&ok| ok) && csv.iter().any(|&ok| !ok));
}
