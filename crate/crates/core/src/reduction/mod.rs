//! Invariants of a generator, reduced first-order dynamics and their numerical verification.

mod golden;
mod quadrature;

pub use golden::{
    alpha, alpha_beta, beta, closed_form_uv, compare_closed_form, inv_alpha, inv_beta,
    iterate_reduced_map, ClosedFormComparison, ClosedFormRow,
};
pub use quadrature::{integrate, CanonicalCoordinate, QUAD_ATOL};

use num_complex::Complex64;
use serde::Serialize;

use crate::expr::{
    Binding, DomainBox, EvalError, Expr, SampleConfig, Sampler, SeqDef, SeqTable, VarNames, VarRef,
};
use crate::slsc::{assign_inline, check_invariant, CharacteristicPair, CheckReport, SlscError};
use crate::system::{DiffSystem, SystemError};
use crate::text::{assignment, content_lines, expr_at, keyword, FormatError};

/// Reduced-map checks required on every orbit.
pub const MIN_STEPS: usize = 12;
pub const REDUCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReductionError {
    #[error("{0}")]
    Invalid(String),
    #[error("integration path meets a zero of q near {at}")]
    ZeroCrossing { at: f64 },
    #[error("quadrature failed: {0}")]
    Quadrature(String),
    #[error("undefined: {0}")]
    Undefined(String),
    #[error(
        "only {accepted} of {wanted} orbits reached {min_steps} steps within {attempts} attempts"
    )]
    OrbitBudget {
        wanted: usize,
        accepted: usize,
        attempts: usize,
        min_steps: usize,
    },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Slsc(#[from] SlscError),
    #[error(transparent)]
    System(#[from] SystemError),
}

/// Invariant `w(n, x[n], y[n], x[n+1], y[n+1])`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantDef {
    pub label: Option<String>,
    pub expr: Expr,
}

/// `u_{n+1} = g_u(n, u, v)`, `v_{n+1} = g_v(n, u, v)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedMap {
    pub gu: Expr,
    pub gv: Expr,
}

/// Contents of a reduction file.
#[derive(Debug, Clone, PartialEq)]
pub struct Reduction {
    pub name: String,
    pub u: InvariantDef,
    pub v: InvariantDef,
    pub map: ReducedMap,
    pub seqs: SeqTable,
    pub generator: Option<CharacteristicPair>,
    pub domain: Option<DomainBox>,
    pub start: i64,
    pub window: Option<(i64, i64)>,
}

impl Reduction {
    pub fn new(u: Expr, v: Expr, map: ReducedMap) -> Result<Self, ReductionError> {
        let r = Reduction {
            name: "reduction".into(),
            u: InvariantDef {
                label: Some("u".into()),
                expr: u,
            },
            v: InvariantDef {
                label: Some("v".into()),
                expr: v,
            },
            map,
            seqs: SeqTable::new(),
            generator: None,
            domain: None,
            start: 0,
            window: None,
        };
        r.validate()?;
        Ok(r)
    }

    fn validate(&self) -> Result<(), ReductionError> {
        for inv in [&self.u, &self.v] {
            if !inv.expr.syms().is_empty() {
                return Err(ReductionError::Invalid(format!(
                    "invariant {} may not contain free symbols",
                    inv.expr
                )));
            }
            if inv.expr.max_offset().is_some_and(|o| o > 1) {
                return Err(ReductionError::Invalid(format!(
                    "invariant {} reaches beyond offset 1",
                    inv.expr
                )));
            }
        }
        for g in [&self.map.gu, &self.map.gv] {
            if g.has_vars() {
                return Err(ReductionError::Invalid(format!(
                    "reduced map {g} may depend on n, u and v only"
                )));
            }
            if let Some(s) = g.syms().into_iter().find(|s| s != "u" && s != "v") {
                return Err(ReductionError::Invalid(format!(
                    "unknown symbol '{s}' in reduced map"
                )));
            }
        }
        Ok(())
    }

    /// Verification settings: the file's window applies to invariance sampling, its box to
    /// orbit starts only.
    pub fn config(&self, base: &SampleConfig) -> ReductionConfig {
        ReductionConfig {
            sample: SampleConfig {
                window: self.window.unwrap_or(base.window),
                ..base.clone()
            },
            orbit_box: self.domain.unwrap_or(base.domain),
            ..ReductionConfig::default()
        }
    }

    fn all_seqs(&self, sys: &DiffSystem) -> SeqTable {
        sys.seqs().merged(&self.seqs)
    }

    /// `(uₙ, vₙ)` at one state.
    pub fn invariants_at(
        &self,
        seqs: &SeqTable,
        n: i64,
        cur: [Complex64; 2],
        next: [Complex64; 2],
    ) -> Result<(f64, f64), EvalError> {
        let b = Binding::new(n)
            .with_seqs(seqs)
            .with_var(VarRef::x(0), cur[0])
            .with_var(VarRef::y(0), cur[1])
            .with_var(VarRef::x(1), next[0])
            .with_var(VarRef::y(1), next[1]);
        Ok((real(self.u.expr.eval(&b)?)?, real(self.v.expr.eval(&b)?)?))
    }

    /// `(g_u, g_v)` at `(n, u, v)`.
    pub fn map_at(&self, seqs: &SeqTable, n: i64, u: f64, v: f64) -> Result<(f64, f64), EvalError> {
        let b = Binding::new(n)
            .with_seqs(seqs)
            .with_sym("u", u)
            .with_sym("v", v);
        Ok((real(self.map.gu.eval(&b)?)?, real(self.map.gv.eval(&b)?)?))
    }

    /// Invariant values along the orbit from `init` at `n0`, one entry per index until the
    /// orbit or an invariant leaves the domain.
    pub fn invariant_values(
        &self,
        sys: &DiffSystem,
        init: [f64; 4],
        n0: i64,
        steps: usize,
    ) -> Result<Vec<(i64, f64, f64)>, ReductionError> {
        let seqs = self.all_seqs(sys);
        let t = sys.iterate(init.map(|v| Complex64::new(v, 0.0)), n0, steps + 1)?;
        let mut out = Vec::new();
        for k in 0..t.points.len().saturating_sub(1) {
            let n = t.index_of(k);
            match self.invariants_at(&seqs, n, t.points[k], t.points[k + 1]) {
                Ok((u, v)) => out.push((n, u, v)),
                Err(e) if e.is_domain() => break,
                Err(e) => return Err(e.into()),
            }
        }
        Ok(out)
    }
}

// Complex values count as leaving the real domain.
fn real(z: Complex64) -> Result<f64, EvalError> {
    if !z.re.is_finite() || z.im.abs() > 1e-12 * z.re.abs().max(1.0) {
        return Err(EvalError::NonFinite);
    }
    Ok(z.re)
}

/// Parse a reduction file.
///
/// ```text
/// reduction <name>
/// seq alpha(n) = ...
/// invariant u = <expr in n, x[n], y[n], x[n+1], y[n+1]>
/// invariant v = ...
/// reduced u' = <expr in n, u, v>
/// reduced v' = ...
/// generator Q1 = ... Q2 = ...
/// box 30 300
/// start 2
/// window 2:24
/// ```
pub fn parse_reduction(src: &str) -> Result<Reduction, ReductionError> {
    let names = VarNames::default();
    let mut name = "reduction".to_string();
    let mut seqs = SeqTable::new();
    let mut u = None;
    let mut v = None;
    let mut gu = None;
    let mut gv = None;
    let mut generator: Option<(usize, String, Option<Expr>, Option<Expr>)> = None;
    let mut domain = None;
    let mut start = 0;
    let mut window = None;
    let mut last_line = 0;
    for (line, body) in content_lines(src) {
        last_line = line;
        let (kw, rest) = keyword(body);
        match kw {
            "reduction" => name = rest.to_string(),
            "seq" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let s = lhs
                    .strip_suffix("(n)")
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FormatError::syntax(line, "expected 'seq <name>(n) = ...'"))?;
                seqs.insert(s, SeqDef::Expr(expr_at(rhs, &names, line)?));
            }
            "invariant" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let e = expr_at(rhs, &names, line)?;
                match lhs {
                    "u" => u = Some(e),
                    "v" => v = Some(e),
                    _ => {
                        return Err(FormatError::syntax(
                            line,
                            "expected 'invariant u' or 'invariant v'",
                        )
                        .into())
                    }
                }
            }
            "reduced" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let e = expr_at(rhs, &names, line)?;
                match lhs {
                    "u'" => gu = Some(e),
                    "v'" => gv = Some(e),
                    _ => {
                        return Err(FormatError::syntax(
                            line,
                            "expected \"reduced u'\" or \"reduced v'\"",
                        )
                        .into())
                    }
                }
            }
            "generator" => {
                let mut block = (line, "generator".to_string(), None, None);
                assign_inline(rest, line, &names, &mut block)?;
                generator = Some(block);
            }
            "box" => {
                let parts: Vec<f64> = rest
                    .split_whitespace()
                    .map(str::parse)
                    .collect::<Result<_, _>>()
                    .map_err(|_| FormatError::syntax(line, "expected 'box <lo> <hi>'"))?;
                match parts[..] {
                    [lo, hi] if lo < hi => domain = Some(DomainBox::new(lo, hi)),
                    _ => {
                        return Err(FormatError::syntax(
                            line,
                            "expected 'box <lo> <hi>' with lo < hi",
                        )
                        .into())
                    }
                }
            }
            "start" => {
                start = rest
                    .parse()
                    .map_err(|_| FormatError::syntax(line, "expected 'start <integer>'"))?;
            }
            "window" => window = Some(parse_window(rest, line)?),
            "end" => {}
            _ => return Err(FormatError::syntax(line, format!("unknown directive '{kw}'")).into()),
        }
    }
    let missing = |what: &str| FormatError::syntax(last_line.max(1), format!("missing {what}"));
    let generator = match generator {
        Some((_, _, Some(q1), Some(q2))) => {
            Some(CharacteristicPair::named(&name, q1, q2, seqs.clone())?)
        }
        Some((line, ..)) => {
            return Err(FormatError::syntax(line, "generator needs both Q1 and Q2").into())
        }
        None => None,
    };
    let r = Reduction {
        name,
        u: InvariantDef {
            label: Some("u".into()),
            expr: u.ok_or_else(|| missing("'invariant u'"))?,
        },
        v: InvariantDef {
            label: Some("v".into()),
            expr: v.ok_or_else(|| missing("'invariant v'"))?,
        },
        map: ReducedMap {
            gu: gu.ok_or_else(|| missing("\"reduced u'\""))?,
            gv: gv.ok_or_else(|| missing("\"reduced v'\""))?,
        },
        seqs,
        generator,
        domain,
        start,
        window,
    };
    r.validate()?;
    Ok(r)
}

/// `a:b` index window.
pub fn parse_window(src: &str, line: usize) -> Result<(i64, i64), FormatError> {
    src.split_once(':')
        .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
        .filter(|(a, b)| a < b)
        .ok_or_else(|| FormatError::syntax(line, "expected a window 'a:b' with a < b"))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReductionConfig {
    pub trials: usize,
    /// Map checks per orbit; orbits cut short below this are retried.
    pub steps: usize,
    pub tol: f64,
    /// Orbit attempts per requested trial.
    pub retry_factor: usize,
    /// Seed, window and box for invariance sampling.
    pub sample: SampleConfig,
    /// Initial values of orbits are drawn from this box.
    pub orbit_box: DomainBox,
}

impl Default for ReductionConfig {
    fn default() -> Self {
        ReductionConfig {
            trials: 20,
            steps: MIN_STEPS,
            tol: REDUCTION_TOL,
            retry_factor: 20,
            sample: SampleConfig::default(),
            orbit_box: DomainBox::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapDeviation {
    pub trial: usize,
    pub n: i64,
    pub component: &'static str,
    pub observed: f64,
    pub predicted: f64,
    pub relative: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReductionReport {
    pub name: String,
    pub trials: usize,
    pub attempts: usize,
    pub checks: usize,
    pub max_deviation: f64,
    pub worst: Option<MapDeviation>,
    /// `X(u)`, `X(v)` when the file names its generator.
    pub invariance: Option<[CheckReport; 2]>,
    pub passed: bool,
}

/// Check `u_{n+1} = g_u`, `v_{n+1} = g_v` along random orbits started at `red.start` with
/// initial values in the sampling box.
pub fn verify_reduction(
    sys: &DiffSystem,
    red: &Reduction,
    cfg: &ReductionConfig,
) -> Result<ReductionReport, ReductionError> {
    let steps = cfg.steps.max(MIN_STEPS);
    let seqs = red.all_seqs(sys);
    let invariance = match &red.generator {
        Some(pair) => {
            let sc = SampleConfig {
                tol: cfg.tol,
                ..cfg.sample.clone()
            };
            Some([
                check_invariant(sys, pair, &red.u.expr, &sc)?,
                check_invariant(sys, pair, &red.v.expr, &sc)?,
            ])
        }
        None => None,
    };
    let mut sampler = Sampler::new(cfg.sample.seed, cfg.orbit_box);
    let budget = cfg.trials * cfg.retry_factor.max(1);
    let mut attempts = 0;
    let mut accepted = 0;
    let mut checks = 0;
    let mut max_deviation = 0.0f64;
    let mut worst: Option<MapDeviation> = None;
    while accepted < cfg.trials {
        if attempts >= budget {
            return Err(ReductionError::OrbitBudget {
                wanted: cfg.trials,
                accepted,
                attempts,
                min_steps: steps,
            });
        }
        attempts += 1;
        let init = [0; 4].map(|_| sampler.value());
        let values = match red.invariant_values(sys, init, red.start, steps + 1) {
            Ok(v) => v,
            Err(ReductionError::System(SystemError::InitViolatesGuard { .. })) => continue,
            Err(e) => return Err(e),
        };
        if values.len() < steps + 1 {
            continue;
        }
        let mut local = Vec::with_capacity(steps);
        let mut ok = true;
        for w in values.windows(2).take(steps) {
            let (n, u, v) = w[0];
            let (_, u1, v1) = w[1];
            let (pu, pv) = match red.map_at(&seqs, n, u, v) {
                Ok(p) => p,
                Err(e) if e.is_domain() => {
                    ok = false;
                    break;
                }
                Err(e) => return Err(e.into()),
            };
            local.push((n, "u", u1, pu));
            local.push((n, "v", v1, pv));
        }
        if !ok {
            continue;
        }
        for (n, component, observed, predicted) in local {
            let relative = (observed - predicted).abs()
                / observed.abs().max(predicted.abs()).max(f64::MIN_POSITIVE);
            checks += 1;
            if relative > max_deviation || worst.is_none() {
                max_deviation = max_deviation.max(relative);
                worst = Some(MapDeviation {
                    trial: accepted,
                    n,
                    component,
                    observed,
                    predicted,
                    relative,
                });
            }
        }
        accepted += 1;
    }
    let inv_ok = invariance
        .as_ref()
        .is_none_or(|r| r.iter().all(|c| c.passed));
    Ok(ReductionReport {
        name: red.name.clone(),
        trials: accepted,
        attempts,
        checks,
        max_deviation,
        worst,
        invariance,
        passed: inv_ok && max_deviation < cfg.tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn example2() -> DiffSystem {
        DiffSystem::new(
            "ex2",
            [
                parse("(x[n]*y[n+1] + 1)/(x[n] + y[n+1])").unwrap(),
                parse("(y[n]*x[n+1] + 1)/(y[n] + x[n+1])").unwrap(),
            ],
        )
        .unwrap()
    }

    const X1: &str = "reduction x1
invariant u = ln((x[n] + 1)/(x[n] - 1))/ln((y[n+1] + 1)/(y[n+1] - 1))
invariant v = ln((y[n] + 1)/(y[n] - 1))/ln((x[n+1] + 1)/(x[n+1] - 1))
reduced u' = 1/(1 + v)
reduced v' = 1/(1 + u)
generator Q1 = (x[n]^2 - 1)*ln((x[n] + 1)/(x[n] - 1)) Q2 = (y[n]^2 - 1)*ln((y[n] + 1)/(y[n] - 1))
box 30 300
";

    #[test]
    fn parses_reduction_file() {
        let r = parse_reduction(X1).unwrap();
        assert_eq!(r.name, "x1");
        assert_eq!(r.map.gu, parse("1/(1 + v)").unwrap());
        assert_eq!(r.domain, Some(DomainBox::new(30.0, 300.0)));
        assert!(r.generator.is_some());
    }

    #[test]
    fn rejects_foreign_symbols() {
        let src = X1.replace("1/(1 + u)", "1/(1 + w)");
        assert!(matches!(
            parse_reduction(&src),
            Err(ReductionError::Invalid(_))
        ));
        assert!(parse_reduction("invariant u = x[n]\n").is_err());
    }

    #[test]
    fn first_values_by_hand() {
        let r = parse_reduction(X1).unwrap();
        let vals = r
            .invariant_values(&example2(), [2.0, 3.0, 5.0, 7.0], 0, 2)
            .unwrap();
        let (_, u0, v0) = vals[0];
        assert!((u0 - 3f64.ln() / (4.0f64 / 3.0).ln()).abs() < 1e-12);
        assert!((v0 - 2f64.ln() / 1.5f64.ln()).abs() < 1e-12);
        assert!((vals[1].1 - 1.5f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((vals[1].1 - 1.0 / (1.0 + v0)).abs() < 1e-12);
    }

    #[test]
    fn x1_reduction_holds() {
        let r = parse_reduction(X1).unwrap();
        let cfg = r.config(&SampleConfig::default());
        let rep = verify_reduction(&example2(), &r, &cfg).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.trials, 20);
        assert_eq!(rep.checks, 20 * MIN_STEPS * 2);
    }

    #[test]
    fn wrong_map_fails() {
        let src = X1.replace("reduced u' = 1/(1 + v)", "reduced u' = 1/(2 + v)");
        let r = parse_reduction(&src).unwrap();
        let cfg = r.config(&SampleConfig::default());
        let rep = verify_reduction(&example2(), &r, &cfg).unwrap();
        assert!(!rep.passed);
        assert_eq!(rep.worst.unwrap().component, "u");
    }

    #[test]
    fn constant_invariants_with_identity_map() {
        let r = Reduction::new(
            Expr::one(),
            Expr::one(),
            ReducedMap {
                gu: parse("u").unwrap(),
                gv: parse("v").unwrap(),
            },
        )
        .unwrap();
        let rep = verify_reduction(&example2(), &r, &ReductionConfig::default()).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_deviation, 0.0);
    }

    #[test]
    fn canonical_coordinate_difference_is_invariant() {
        // s(x[n]) − s(y[n]) for the log-type characteristic of the first generator.
        let q = parse("(t^2 - 1)*ln((t + 1)/(t - 1))").unwrap();
        let s = CanonicalCoordinate::new(q, 2.0).unwrap();
        let closed = |x: f64| -0.5 * ((x + 1.0) / (x - 1.0)).ln().ln();
        for x in [1.6, 2.5, 3.3, 4.9] {
            let got = s.eval(x).unwrap();
            assert!((got - (closed(x) - closed(2.0))).abs() < 1e-9);
        }
    }
}
