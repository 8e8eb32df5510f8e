//! Equation text parser must never panic, and whatever it accepts must
//! survive a print/reparse round trip: the printed form parses, printing
//! is a fixed point, and both trees evaluate alike. Sugar operators print
//! as compound forms (`square` as `^2`, `inv` as `1/..`), so tree shapes
//! may legitimately differ; values may not.

#![no_main]

use libfuzzer_sys::fuzz_target;

use kepler_sr::expr::parse::parse;
use kepler_sr::expr::print::to_text;
use kepler_sr::expr::{evaluate, Expr};

fn probe_columns(expr: &Expr) -> Option<Vec<Vec<f64>>> {
    let arity = match expr.max_feature_index() {
        None => 0,
        // Fuzzed input can name absurd feature indices; evaluation needs a
        // column per index, so only small aritities are probed.
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

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok((expr, constants)) = parse(text) else {
        return;
    };
    let printed = to_text(&expr, &constants);
    let (expr2, constants2) = parse(&printed)
        .unwrap_or_else(|e| panic!("printed form `{printed}` does not reparse: {e}"));
    assert_eq!(
        printed,
        to_text(&expr2, &constants2),
        "printing is not a fixed point"
    );
    if let Some(columns) = probe_columns(&expr) {
        let first = evaluate(&expr, &constants, &columns).expect("parsed tree evaluates");
        let second = evaluate(&expr2, &constants2, &columns).expect("reparsed tree evaluates");
        for (a, b) in first.iter().zip(&second) {
            assert!(agree(*a, *b), "`{printed}` evaluates differently: {a} vs {b}");
        }
    }
});
