//! First integrals `φ(n, x[n], y[n], x[n+1], y[n+1])` with `(𝒮 − Id)φ = 0` on solutions.
//!
//! The gradient `(P₁, Q₁, P₂, Q₂)` of `φ` with respect to `(x[n], y[n], x[n+1], y[n+1])`
//! satisfies a second-order functional system in `P₂`, `Q₂` alone; `P₁`, `Q₁` follow from it.

mod poly;
mod space;

pub use poly::{homotopy_integral, Poly};
pub use space::{
    closed_form_integral, solve_integral_space, DeterminingElement, IntegralElement, IntegralSpace, INTEGRABILITY_TOL,
};

use num_complex::Complex64;
use serde::Serialize;

use crate::detsolve::DetError;
use crate::expr::{Binding, Component, EvalError, Expr, SampleConfig, Sampler, SeqDef, SeqTable, VarNames, VarRef};
use crate::system::{DiffSystem, SystemError};
use crate::text::{assignment, content_lines, expr_at, keyword, FormatError};

use poly::window_var;

pub const DEFAULT_INTEGRAL_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConservationError {
    #[error("{0}")]
    Invalid(String),
    #[error("gradient component is not polynomial in the window variables: {0}")]
    NonPolynomial(String),
    #[error("gradient {name} is not closed (worst mixed-partial mismatch {residual:.3e})")]
    NotExact { name: String, residual: f64 },
    #[error("(S - Id) of {name} still depends on the state (spread {spread:.3e} at n = {n})")]
    Inconsistent { name: String, n: i64, spread: f64 },
    #[error("only {accepted} of {wanted} orbits completed {steps} steps within {attempts} attempts")]
    OrbitBudget {
        wanted: usize,
        accepted: usize,
        attempts: usize,
        steps: usize,
    },
    #[error("no sample point inside the domain was found")]
    NoValidSample,
    #[error(transparent)]
    Det(#[from] DetError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Partial derivatives of a first integral: `P₁ = ∂φ/∂x[n]`, `P₂ = ∂φ/∂x[n+1]`,
/// `Q₁ = ∂φ/∂y[n]`, `Q₂ = ∂φ/∂y[n+1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientQuad {
    pub name: String,
    pub p1: Expr,
    pub p2: Expr,
    pub q1: Expr,
    pub q2: Expr,
    pub seqs: SeqTable,
}

impl GradientQuad {
    /// Components ordered as `(x[n], y[n], x[n+1], y[n+1])`.
    pub fn gradient(&self) -> [Expr; 4] {
        [self.p1.clone(), self.q1.clone(), self.p2.clone(), self.q2.clone()]
    }

    /// Symbolic gradient of a first integral.
    pub fn of_integral(f: &FirstIntegral) -> GradientQuad {
        let d = |i: usize| f.phi.diff(window_var(i)).simplify();
        GradientQuad {
            name: f.name.clone(),
            p1: d(0),
            q1: d(1),
            p2: d(2),
            q2: d(3),
            seqs: f.seqs.clone(),
        }
    }

    /// Complete `(P₂, Q₂)` with `P₁ = 𝒮(P₂)·ω₁,ₓ + 𝒮(Q₂)·ω₂,ₓ` and
    /// `Q₁ = 𝒮(P₂)·ω₁,ᵧ + 𝒮(Q₂)·ω₂,ᵧ` (partials in `x[n]`, `y[n]`).
    pub fn from_second(
        sys: &DiffSystem,
        name: &str,
        p2: Expr,
        q2: Expr,
        seqs: &SeqTable,
    ) -> GradientQuad {
        let sp = sys.closure_shift(&p2, 1);
        let sq = sys.closure_shift(&q2, 1);
        let first = |v: VarRef| {
            let w1 = sys.omega(Component::X).diff(v);
            let w2 = sys.omega(Component::Y).diff(v);
            Expr::add(vec![
                Expr::mul(vec![sp.clone(), w1]),
                Expr::mul(vec![sq.clone(), w2]),
            ])
            .simplify()
        };
        GradientQuad {
            name: name.to_string(),
            p1: first(VarRef::x(0)),
            q1: first(VarRef::y(0)),
            p2,
            q2,
            seqs: sys.seqs().merged(seqs),
        }
    }
}

/// The six mixed-partial equalities of a gradient field in four variables, as
/// `(label, lhs − rhs)`.
pub fn integrability_conditions(g: &GradientQuad) -> Vec<(String, Expr)> {
    let grad = g.gradient();
    let label = ["P1", "Q1", "P2", "Q2"];
    let mut out = Vec::with_capacity(6);
    for i in 0..4 {
        for j in i + 1..4 {
            let lhs = grad[i].diff(window_var(j));
            let rhs = grad[j].diff(window_var(i));
            out.push((
                format!(
                    "d{}/d{} = d{}/d{}",
                    label[i],
                    window_var(j),
                    label[j],
                    window_var(i)
                ),
                Expr::sub(lhs, rhs).simplify(),
            ));
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionResult {
    pub condition: String,
    pub max_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegrabilityReport {
    pub name: String,
    pub conditions: Vec<ConditionResult>,
    pub max_residual: f64,
    pub samples: usize,
    pub passed: bool,
}

/// Random window points `(n, x[n], y[n], x[n+1], y[n+1])` cycling through `cfg.window`.
fn window_points(cfg: &SampleConfig, count: usize) -> Vec<(i64, [f64; 4])> {
    let mut sampler = Sampler::from_config(cfg);
    let (lo, hi) = cfg.window;
    let span = (hi - lo + 1).max(1);
    (0..count)
        .map(|i| (lo + i as i64 % span, [0; 4].map(|_| sampler.value())))
        .collect()
}

fn bind<'a>(seqs: &'a SeqTable, n: i64, z: &[f64; 4]) -> Binding<'a> {
    let mut b = Binding::new(n).with_seqs(seqs);
    for (i, v) in z.iter().enumerate() {
        b.set_var(window_var(i), *v);
    }
    b
}

/// Sampled check of all six mixed-partial equalities; each residual must stay below `cfg.tol`.
pub fn integrability_check(
    g: &GradientQuad,
    cfg: &SampleConfig,
) -> Result<IntegrabilityReport, ConservationError> {
    let conds = integrability_conditions(g);
    let samples = cfg.samples.unwrap_or(DEFAULT_INTEGRAL_SAMPLES).max(1);
    let mut worst = vec![0.0f64; conds.len()];
    let mut done = 0;
    for (n, z) in window_points(cfg, samples * 4) {
        if done == samples {
            break;
        }
        let b = bind(&g.seqs, n, &z);
        let mut vals = Vec::with_capacity(conds.len());
        for (_, e) in &conds {
            match e.eval(&b) {
                Ok(v) => vals.push(v.norm()),
                Err(err) if err.is_domain() || matches!(err, EvalError::SeqOutOfRange { .. }) => {
                    break
                }
                Err(err) => return Err(err.into()),
            }
        }
        if vals.len() < conds.len() {
            continue;
        }
        for (w, v) in worst.iter_mut().zip(vals) {
            *w = w.max(if v.is_nan() { f64::INFINITY } else { v });
        }
        done += 1;
    }
    if done == 0 {
        return Err(ConservationError::NoValidSample);
    }
    let max_residual = worst.iter().copied().fold(0.0, f64::max);
    Ok(IntegrabilityReport {
        name: g.name.clone(),
        conditions: conds
            .into_iter()
            .zip(worst)
            .map(|((condition, _), max_residual)| ConditionResult {
                condition,
                max_residual,
            })
            .collect(),
        max_residual,
        samples: done,
        passed: max_residual < cfg.tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Solved,
    UserSupplied,
}

/// `φ` over `n`, `x[n]`, `y[n]`, `x[n+1]`, `y[n+1]` and named sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstIntegral {
    pub name: String,
    pub phi: Expr,
    pub seqs: SeqTable,
    pub provenance: Provenance,
    /// Whether `φ` carries a tabulated index function `F(n)`.
    pub index_term: bool,
}

impl FirstIntegral {
    pub fn user(name: &str, phi: Expr, seqs: SeqTable) -> Result<Self, ConservationError> {
        if phi.max_offset().is_some_and(|o| o > 1) || !phi.syms().is_empty() {
            return Err(ConservationError::Invalid(format!(
                "{name}: first integrals depend on n, x[n], y[n], x[n+1], y[n+1] only"
            )));
        }
        Ok(FirstIntegral {
            name: name.to_string(),
            phi,
            seqs,
            provenance: Provenance::UserSupplied,
            index_term: false,
        })
    }

    pub fn value(&self, seqs: &SeqTable, n: i64, z: &[f64; 4]) -> Result<Complex64, EvalError> {
        self.phi.eval(&bind(seqs, n, z))
    }
}

/// Potential of a closed polynomial gradient, with `F(n)` fixed by `(𝒮 − Id)φ = 0`.
///
/// The residual of the potential must be free of the state; if it is not negligible it is
/// cancelled by `F(n) = −Σ_{m<n} g(m)` tabulated from the start of `cfg.window`.
pub fn assemble_integral(
    sys: &DiffSystem,
    g: &GradientQuad,
    cfg: &SampleConfig,
) -> Result<FirstIntegral, ConservationError> {
    let report = integrability_check(g, cfg)?;
    if !report.passed {
        return Err(ConservationError::NotExact {
            name: g.name.clone(),
            residual: report.max_residual,
        });
    }
    let phi = homotopy_integral(&g.gradient())?;
    let residual = Expr::sub(sys.closure_shift(&phi, 1), phi.clone());
    let seqs = sys.seqs().merged(&g.seqs);
    let (lo, hi) = cfg.window;
    let mut sampler = Sampler::from_config(cfg);
    let mut offsets = Vec::new();
    for n in lo..=hi {
        let mut vals = Vec::new();
        let mut attempts = 0;
        while vals.len() < 4 && attempts < 40 {
            attempts += 1;
            let z = [0; 4].map(|_| sampler.value());
            match residual.eval(&bind(&seqs, n, &z)) {
                Ok(v) => vals.push(v),
                Err(e) if e.is_domain() => {}
                Err(e) => return Err(e.into()),
            }
        }
        let Some(first) = vals.first().copied() else {
            return Err(ConservationError::NoValidSample);
        };
        let spread = vals.iter().map(|v| (v - first).norm()).fold(0.0, f64::max);
        if spread > cfg.tol * first.norm().max(1.0) {
            return Err(ConservationError::Inconsistent {
                name: g.name.clone(),
                n,
                spread,
            });
        }
        offsets.push(first);
    }
    if offsets.iter().all(|v| v.norm() < cfg.tol) {
        return Ok(FirstIntegral {
            name: g.name.clone(),
            phi,
            seqs: g.seqs.clone(),
            provenance: Provenance::Solved,
            index_term: false,
        });
    }
    let mut values = Vec::with_capacity(offsets.len() + 1);
    let mut acc = Complex64::new(0.0, 0.0);
    values.push(acc);
    for g in &offsets {
        acc -= g;
        values.push(acc);
    }
    let f_name = format!("{}_F", g.name);
    let mut out_seqs = g.seqs.clone();
    out_seqs.insert(&f_name, SeqDef::Table { start: lo, values });
    Ok(FirstIntegral {
        name: g.name.clone(),
        phi: Expr::add(vec![phi, Expr::seq(&f_name, 0)]),
        seqs: out_seqs,
        provenance: Provenance::Solved,
        index_term: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntegralCheckConfig {
    pub trials: usize,
    pub steps: usize,
    pub tol: f64,
    pub retry_factor: usize,
    /// Seed, box and orbit start (`window.0`).
    pub sample: SampleConfig,
}

impl Default for IntegralCheckConfig {
    fn default() -> Self {
        IntegralCheckConfig {
            trials: 20,
            steps: 40,
            tol: 1e-9,
            retry_factor: 20,
            sample: SampleConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntegralReport {
    pub name: String,
    pub trials: usize,
    pub attempts: usize,
    pub steps: usize,
    pub max_deviation: f64,
    /// `(trial, n)` of the largest `|φ(n+1) − φ(n)|`.
    pub worst: Option<(usize, i64)>,
    pub passed: bool,
}

/// `φ` along one orbit from `init` at `n0`; stops at the first point outside the domain.
pub fn integral_along(
    sys: &DiffSystem,
    f: &FirstIntegral,
    init: [f64; 4],
    n0: i64,
    steps: usize,
) -> Result<Vec<Complex64>, ConservationError> {
    let seqs = sys.seqs().merged(&f.seqs);
    let t = sys.iterate(init.map(|v| Complex64::new(v, 0.0)), n0, steps + 1)?;
    let mut out = Vec::with_capacity(t.points.len());
    for k in 0..t.points.len().saturating_sub(1) {
        let [a, b] = t.points[k];
        let [c, d] = t.points[k + 1];
        if [a, b, c, d].iter().any(|z| z.im != 0.0) {
            break;
        }
        match f.value(&seqs, t.index_of(k), &[a.re, b.re, c.re, d.re]) {
            Ok(v) => out.push(v),
            Err(e) if e.is_domain() || matches!(e, EvalError::SeqOutOfRange { .. }) => break,
            Err(e) => return Err(e.into()),
        }
    }
    Ok(out)
}

/// Largest `|φ(n+1) − φ(n)|` along random orbits of `cfg.steps` steps.
pub fn verify_integral(
    sys: &DiffSystem,
    f: &FirstIntegral,
    cfg: &IntegralCheckConfig,
) -> Result<IntegralReport, ConservationError> {
    let mut sampler = Sampler::from_config(&cfg.sample);
    let budget = cfg.trials * cfg.retry_factor.max(1);
    let (mut attempts, mut accepted) = (0, 0);
    let mut max_deviation = 0.0f64;
    let mut worst = None;
    let n0 = cfg.sample.window.0;
    while accepted < cfg.trials {
        if attempts >= budget {
            return Err(ConservationError::OrbitBudget {
                wanted: cfg.trials,
                accepted,
                attempts,
                steps: cfg.steps,
            });
        }
        attempts += 1;
        let init = [0; 4].map(|_| sampler.value());
        let values = match integral_along(sys, f, init, n0, cfg.steps) {
            Ok(v) => v,
            Err(ConservationError::System(SystemError::InitViolatesGuard { .. })) => continue,
            Err(e) => return Err(e),
        };
        if values.len() < cfg.steps + 1 {
            continue;
        }
        for (k, w) in values.windows(2).enumerate() {
            let d = (w[1] - w[0]).norm();
            let d = if d.is_nan() { f64::INFINITY } else { d };
            if d > max_deviation || worst.is_none() {
                max_deviation = max_deviation.max(d);
                worst = Some((accepted, n0 + k as i64));
            }
        }
        accepted += 1;
    }
    Ok(IntegralReport {
        name: f.name.clone(),
        trials: accepted,
        attempts,
        steps: cfg.steps,
        max_deviation,
        worst,
        passed: max_deviation < cfg.tol,
    })
}

/// `(P₂-equation, Q₂-equation)` of the determining system for first integrals:
/// `𝒮²(P₂)·𝒮(ω₁,ₓ) + 𝒮²(Q₂)·𝒮(ω₂,ₓ) + 𝒮(P₂)·ω₁,ₓ₁ + 𝒮(Q₂)·ω₂,ₓ₁ − P₂` and its `y` analogue,
/// where `ₓ` and `ₓ₁` denote partials in `x[n]` and `x[n+1]`.
pub fn integral_residual(
    sys: &DiffSystem,
    p2: &Expr,
    q2: &Expr,
) -> Result<[Expr; 2], ConservationError> {
    if sys.order() != 2 {
        return Err(ConservationError::Invalid(
            "first integrals are implemented for second-order systems".into(),
        ));
    }
    for e in [p2, q2] {
        if e.max_offset().is_some_and(|o| o > 0) || !e.syms().is_empty() {
            return Err(ConservationError::Invalid(format!(
                "{e}: P2 and Q2 may depend on n, x[n], y[n] only"
            )));
        }
    }
    let s1 = [sys.closure_shift(p2, 1), sys.closure_shift(q2, 1)];
    let s2 = [sys.closure_shift(p2, 2), sys.closure_shift(q2, 2)];
    let omega = [sys.omega(Component::X), sys.omega(Component::Y)];
    let equation = |c: Component, own: &Expr| {
        let base = VarRef::new(c, 0);
        let next = VarRef::new(c, 1);
        let mut terms = Vec::new();
        for i in 0..2 {
            let shifted = sys.closure_shift(&omega[i].diff(base), 1);
            terms.push(Expr::mul(vec![s2[i].clone(), shifted]));
            terms.push(Expr::mul(vec![s1[i].clone(), omega[i].diff(next)]));
        }
        terms.push(Expr::neg(own.clone()));
        Expr::add(terms)
    };
    Ok([equation(Component::X, p2), equation(Component::Y, q2)])
}

/// Parse integral files: `integral <name> phi = <expr>` lines plus `seq a(n) = ...`.
pub fn parse_integrals(src: &str) -> Result<Vec<FirstIntegral>, ConservationError> {
    let names = VarNames::default();
    let mut seqs = SeqTable::new();
    let mut found: Vec<(usize, String, Expr)> = Vec::new();
    for (line, body) in content_lines(src) {
        let (kw, rest) = keyword(body);
        match kw {
            "seq" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let s = lhs
                    .strip_suffix("(n)")
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FormatError::syntax(line, "expected 'seq <name>(n) = ...'"))?;
                seqs.insert(s, SeqDef::Expr(expr_at(rhs, &names, line)?));
            }
            "integral" => {
                let (name, tail) = keyword(rest);
                let (lhs, rhs) = assignment(tail, line)?;
                if name.is_empty() || lhs != "phi" {
                    return Err(
                        FormatError::syntax(line, "expected 'integral <name> phi = ...'").into(),
                    );
                }
                found.push((line, name.to_string(), expr_at(rhs, &names, line)?));
            }
            "end" => {}
            _ => return Err(FormatError::syntax(line, format!("unknown directive '{kw}'")).into()),
        }
    }
    if found.is_empty() {
        return Err(FormatError::syntax(1, "no 'integral' lines").into());
    }
    found
        .into_iter()
        .map(|(_, name, phi)| FirstIntegral::user(&name, phi, seqs.clone()))
        .collect()
}
