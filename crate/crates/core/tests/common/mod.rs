//! Shared fixtures: preset files and the kernel property suites.
#![allow(dead_code)]

use std::path::PathBuf;

use dsym_core::expr::{parse, Binding, Expr, VarRef};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};

pub fn problem(name: &str) -> String {
    let p: PathBuf = [env!("CARGO_MANIFEST_DIR"), "..", "..", "problems", name]
        .iter()
        .collect();
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

pub const WINDOW_VARS: [VarRef; 4] = [
    VarRef { comp: dsym_core::expr::Component::X, offset: 0 },
    VarRef { comp: dsym_core::expr::Component::Y, offset: 0 },
    VarRef { comp: dsym_core::expr::Component::X, offset: 1 },
    VarRef { comp: dsym_core::expr::Component::Y, offset: 1 },
];

fn leaf() -> impl Strategy<Value = Expr> {
    prop_oneof![
        (0..4usize).prop_map(|i| Expr::var(WINDOW_VARS[i])),
        Just(Expr::add(vec![Expr::index(), Expr::one()])),
        (1..6i64).prop_map(Expr::int),
        (1..6i64, 2..5i64).prop_map(|(a, b)| Expr::ratio(a, b)),
    ]
}

/// Expressions that are smooth and real on the sampling box: denominators are `1 + b²`,
/// logarithms take `1 + a²`, fractional powers act on state variables.
pub fn smooth_expr() -> impl Strategy<Value = Expr> {
    leaf().prop_recursive(3, 24, 2, |inner| {
        prop_oneof![
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::add(vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::sub(a, b)),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| Expr::mul(vec![a, b])),
            (inner.clone(), inner.clone()).prop_map(|(a, b)| {
                Expr::div(a, Expr::add(vec![Expr::one(), Expr::powi(b, 2)]))
            }),
            (inner.clone(), 0..3i32).prop_map(|(a, k)| Expr::powi(a, k)),
            inner
                .clone()
                .prop_map(|a| Expr::ln(Expr::add(vec![Expr::one(), Expr::powi(a, 2)]))),
            (0..4usize, 1..4i64).prop_map(|(i, d)| {
                Expr::pow(Expr::var(WINDOW_VARS[i]), Expr::ratio(1, d + 1))
            }),
            inner.prop_map(Expr::neg),
        ]
    })
}

/// Index and window-variable values inside the default box `[1.5, 5]`.
pub fn point() -> impl Strategy<Value = (i64, [f64; 4])> {
    (0..=24i64, prop::array::uniform4(1.5..5.0f64))
}

pub fn bind(n: i64, z: &[f64; 4]) -> Binding<'static> {
    let mut b = Binding::new(n);
    for (v, x) in WINDOW_VARS.iter().zip(z) {
        b.set_var(*v, *x);
    }
    b
}

/// Largest modulus over all subexpressions; the scale for rounding in cancellations.
pub fn magnitude(e: &Expr, b: &Binding) -> f64 {
    let own = e.eval(b).map_or(0.0, |v| v.norm());
    e.children()
        .into_iter()
        .map(|c| magnitude(c, b))
        .fold(own, f64::max)
}

pub fn derivative_matches_finite_difference(
    e: &Expr,
    var: usize,
    n: i64,
    z: [f64; 4],
) -> Result<(), TestCaseError> {
    let d = e.diff(WINDOW_VARS[var]);
    let at = |z: &[f64; 4]| e.eval(&bind(n, z));
    let (Ok(f), Ok(exact)) = (at(&z), d.eval(&bind(n, &z))) else {
        return Err(TestCaseError::reject("outside the domain"));
    };
    let h = 1e-5 * z[var].abs();
    let (mut up, mut down) = (z, z);
    up[var] += h;
    down[var] -= h;
    let (Ok(fu), Ok(fd)) = (at(&up), at(&down)) else {
        return Err(TestCaseError::reject("outside the domain"));
    };
    let numeric = (fu - fd) / (2.0 * h);
    // Relative to the derivative's natural scale |f|/|z|, which bounds the rounding of the
    // difference quotient.
    let scale = exact.norm().max(f.norm() / z[var].abs()).max(1.0);
    let rel = (exact - numeric).norm() / scale;
    prop_assert!(rel < 1e-6, "{e}: d/d{} exact {exact} numeric {numeric}", WINDOW_VARS[var]);
    Ok(())
}

/// `S(a ∘ b) = S(a) ∘ S(b)` and `S(e)` at `n` equals `e` at `n + 1` on the moved state.
pub fn shift_is_a_homomorphism(
    a: &Expr,
    b: &Expr,
    n: i64,
    z: [f64; 4],
    far: [f64; 2],
) -> Result<(), TestCaseError> {
    let mut at_n = bind(n, &z);
    at_n.set_var(VarRef::x(2), far[0]);
    at_n.set_var(VarRef::y(2), far[1]);
    let moved = bind(n + 1, &[z[2], z[3], far[0], far[1]]);
    let pairs = [
        (Expr::add(vec![a.clone(), b.clone()]), Expr::add(vec![a.shift(1), b.shift(1)])),
        (Expr::mul(vec![a.clone(), b.clone()]), Expr::mul(vec![a.shift(1), b.shift(1)])),
    ];
    for (e, split) in pairs {
        let (Ok(whole), Ok(parts), Ok(later)) =
            (e.shift(1).eval(&at_n), split.eval(&at_n), e.eval(&moved))
        else {
            return Err(TestCaseError::reject("outside the domain"));
        };
        let scale = magnitude(&e, &moved).max(1.0);
        prop_assert!((whole - parts).norm() <= 1e-12 * scale, "{e}: {whole} vs {parts}");
        prop_assert!((whole - later).norm() <= 1e-12 * scale, "{e}: {whole} vs {later}");
    }
    Ok(())
}

pub fn simplify_is_sound(e: &Expr, n: i64, z: [f64; 4]) -> Result<(), TestCaseError> {
    let s = e.simplify();
    let b = bind(n, &z);
    let (Ok(before), Ok(after)) = (e.eval(&b), s.eval(&b)) else {
        return Err(TestCaseError::reject("outside the domain"));
    };
    let scale = magnitude(e, &b).max(magnitude(&s, &b)).max(1.0);
    prop_assert!(
        (before - after).norm() <= 1e-9 * scale,
        "{e} simplified to {s}: {before} vs {after}"
    );
    Ok(())
}

/// Printed text parses back to an expression with the same values, and after one pass
/// through the parser the printed form is a fixed point.
pub fn parse_round_trips(e: &Expr) -> Result<(), TestCaseError> {
    let text = e.to_string();
    let back = parse(&text).map_err(|err| TestCaseError::fail(format!("{text}: {err}")))?;
    let canonical = back.to_string();
    let again = parse(&canonical).map_err(|err| TestCaseError::fail(format!("{canonical}: {err}")))?;
    prop_assert_eq!(again.to_string(), canonical);
    for probe in [(3, [2.0, 3.5, 1.75, 4.25]), (17, [4.5, 1.6, 2.2, 3.1])] {
        let b = bind(probe.0, &probe.1);
        if let (Ok(u), Ok(v)) = (e.eval(&b), back.eval(&b)) {
            let scale = magnitude(e, &b).max(1.0);
            prop_assert!((u - v).norm() <= 1e-12 * scale, "{text}: {u} vs {v}");
        }
    }
    Ok(())
}

/// Run the four kernel suites with `cases` cases each; `(suite, cases run or failure)`.
pub fn run_kernel_properties(cases: u32) -> Vec<(&'static str, Result<u32, String>)> {
    let config = || Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    };
    let mut out = Vec::new();
    let mut runner = TestRunner::new(config());
    let r = runner.run(&(smooth_expr(), 0..4usize, point()), |(e, v, (n, z))| {
        derivative_matches_finite_difference(&e, v, n, z)
    });
    out.push(("derivative vs finite difference", r.map(|_| cases).map_err(|e| e.to_string())));
    let mut runner = TestRunner::new(config());
    let r = runner.run(
        &(smooth_expr(), smooth_expr(), point(), prop::array::uniform2(1.5..5.0f64)),
        |(a, b, (n, z), far)| shift_is_a_homomorphism(&a, &b, n, z, far),
    );
    out.push(("shift homomorphism", r.map(|_| cases).map_err(|e| e.to_string())));
    let mut runner = TestRunner::new(config());
    let r = runner.run(&(smooth_expr(), point()), |(e, (n, z))| simplify_is_sound(&e, n, z));
    out.push(("simplify soundness", r.map(|_| cases).map_err(|e| e.to_string())));
    let mut runner = TestRunner::new(config());
    let r = runner.run(&smooth_expr(), |e| parse_round_trips(&e));
    out.push(("parse round trip", r.map(|_| cases).map_err(|e| e.to_string())));
    out
}
