//! Linearized symmetry condition for point characteristics, invariance checks and brackets.

use serde::Serialize;

use crate::expr::{
    Binding, Component, EvalError, Expr, SampleConfig, Sampler, SeqDef, SeqTable, VarNames, VarRef,
};
use crate::system::DiffSystem;
use crate::text::{assignment, content_lines, expr_at, keyword, FormatError};

/// Expressions larger than this skip the symbolic fast path.
const SYMBOLIC_SIZE_LIMIT: usize = 4000;
pub const DEFAULT_CHECK_SAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SlscError {
    #[error(
        "characteristic {0} depends on shifted variables; only point characteristics are supported"
    )]
    NonPoint(String),
    #[error("no sample point inside the domain was found")]
    NoValidSample,
    #[error("bracket depends on shifted variables: {0}")]
    BracketNotPoint(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Format(#[from] FormatError),
}

/// `(Q₁, Q₂)` depending on `n`, `x[n]`, `y[n]` and named sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicPair {
    pub name: String,
    pub q: [Expr; 2],
    pub seqs: SeqTable,
}

impl CharacteristicPair {
    pub fn new(q1: Expr, q2: Expr) -> Result<Self, SlscError> {
        CharacteristicPair::named("Q", q1, q2, SeqTable::new())
    }

    pub fn named(name: &str, q1: Expr, q2: Expr, seqs: SeqTable) -> Result<Self, SlscError> {
        for q in [&q1, &q2] {
            if q.max_offset().is_some_and(|m| m > 0) {
                return Err(SlscError::NonPoint(q.to_string()));
            }
        }
        Ok(CharacteristicPair {
            name: name.to_string(),
            q: [q1, q2],
            seqs,
        })
    }

    pub fn component(&self, c: Component) -> &Expr {
        &self.q[c.index()]
    }

    /// Prolonged coefficient `S^j(Q_c)`.
    pub fn prolonged(&self, sys: &DiffSystem, c: Component, j: u32) -> Expr {
        sys.closure_shift(self.component(c), j)
    }
}

/// Outcome of a sampled residual check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckReport {
    pub passed: bool,
    pub max_residual: f64,
    pub samples: usize,
    pub symbolic_zero: bool,
    /// Index and state at the worst sample.
    pub worst: Option<SamplePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SamplePoint {
    pub n: i64,
    pub state: Vec<(String, f64)>,
}

/// `S^N(Q_i) − Σ_c Σ_{j<N} S^j(Q_c)·∂ωᵢ/∂(c, j)` for arbitrary coefficient expressions.
pub fn symmetry_residual(sys: &DiffSystem, q: &[Expr; 2]) -> [Expr; 2] {
    let order = sys.order();
    let prolonged: Vec<Vec<Expr>> = Component::ALL
        .iter()
        .map(|c| {
            (0..order)
                .map(|j| sys.closure_shift(&q[c.index()], j))
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(2);
    for i in Component::ALL {
        let w = sys.omega(i);
        let mut terms = vec![sys.closure_shift(&q[i.index()], order)];
        for c in Component::ALL {
            for j in 0..order {
                let d = w.diff(VarRef::new(c, j));
                if d.is_zero() {
                    continue;
                }
                let coeff = &prolonged[c.index()][j as usize];
                if coeff.is_zero() {
                    continue;
                }
                terms.push(Expr::neg(Expr::mul(vec![coeff.clone(), d])));
            }
        }
        out.push(Expr::add(terms));
    }
    [out[0].clone(), out[1].clone()]
}

pub fn slsc_residual(sys: &DiffSystem, pair: &CharacteristicPair) -> [Expr; 2] {
    symmetry_residual(sys, &pair.q)
}

/// `X(w) = Σ_c Σ_{j<N} S^j(Q_c)·∂w/∂(c, j)`.
pub fn apply_generator(sys: &DiffSystem, pair: &CharacteristicPair, w: &Expr) -> Expr {
    let w = sys.reduce(w);
    let mut terms = Vec::new();
    for c in Component::ALL {
        for j in 0..sys.order() {
            let d = w.diff(VarRef::new(c, j));
            if d.is_zero() {
                continue;
            }
            terms.push(Expr::mul(vec![pair.prolonged(sys, c, j), d]));
        }
    }
    Expr::add(terms)
}

fn try_symbolic_zero(exprs: &[Expr]) -> bool {
    exprs
        .iter()
        .all(|e| e.size() <= SYMBOLIC_SIZE_LIMIT && e.simplifies_to_zero())
}

/// Per-index divisor applied to sampled residuals.
pub type ResidualScale<'a> = &'a dyn Fn(i64) -> f64;

/// Evaluate expressions at box samples cycling through the index window; max modulus over all.
pub fn sample_max(
    sys: &DiffSystem,
    exprs: &[Expr],
    seqs: &SeqTable,
    samples: usize,
    cfg: &SampleConfig,
    scale: Option<ResidualScale>,
) -> Result<(f64, usize, Option<SamplePoint>), SlscError> {
    let mut sampler = Sampler::from_config(cfg);
    let (lo, hi) = cfg.window;
    let span = (hi - lo + 1).max(1);
    let mut worst = 0.0f64;
    let mut worst_pt = None;
    let mut done = 0;
    let mut attempts = 0;
    let mut last_err: Option<EvalError> = None;
    while done < samples && attempts < samples * 10 + 20 {
        let n = lo + (attempts as i64 % span);
        attempts += 1;
        let b = sample_binding(sys, seqs, n, &mut sampler);
        let mut vals = Vec::with_capacity(exprs.len());
        let mut ok = true;
        for e in exprs {
            match e.eval(&b) {
                Ok(v) => vals.push(v.norm()),
                Err(err) if err.is_domain() => {
                    ok = false;
                    break;
                }
                Err(err @ EvalError::SeqOutOfRange { .. }) => {
                    ok = false;
                    last_err = Some(err);
                    break;
                }
                Err(err) => return Err(err.into()),
            }
        }
        if !ok {
            continue;
        }
        done += 1;
        let div = scale.map_or(1.0, |f| f(n));
        let m = vals.into_iter().fold(0.0, f64::max) / div;
        if m > worst || worst_pt.is_none() {
            worst = worst.max(m);
            worst_pt = Some(describe(&b, sys.order()));
        }
        if m.is_nan() {
            worst = f64::INFINITY;
        }
    }
    if done == 0 {
        return Err(match last_err {
            Some(e) => e.into(),
            None => SlscError::NoValidSample,
        });
    }
    Ok((worst, done, worst_pt))
}

fn sample_binding<'a>(
    sys: &DiffSystem,
    seqs: &'a SeqTable,
    n: i64,
    sampler: &mut Sampler,
) -> Binding<'a> {
    let mut b = Binding::new(n).with_seqs(seqs);
    for off in 0..sys.order() {
        for c in Component::ALL {
            b.set_var(VarRef::new(c, off), sampler.value());
        }
    }
    b
}

fn describe(b: &Binding, order: u32) -> SamplePoint {
    let mut state = Vec::new();
    for off in 0..order {
        for c in Component::ALL {
            let v = VarRef::new(c, off);
            if let Some(z) = b.var(v) {
                state.push((v.to_string(), z.re));
            }
        }
    }
    SamplePoint { n: b.n, state }
}

fn check_exprs(
    sys: &DiffSystem,
    exprs: &[Expr],
    seqs: &SeqTable,
    cfg: &SampleConfig,
    scale: Option<ResidualScale>,
) -> Result<CheckReport, SlscError> {
    if try_symbolic_zero(exprs) {
        return Ok(CheckReport {
            passed: true,
            max_residual: 0.0,
            samples: 0,
            symbolic_zero: true,
            worst: None,
        });
    }
    let samples = cfg.samples.unwrap_or(DEFAULT_CHECK_SAMPLES).max(1);
    let (max, done, worst) = sample_max(sys, exprs, seqs, samples, cfg, scale)?;
    Ok(CheckReport {
        passed: max < cfg.tol,
        max_residual: max,
        samples: done,
        symbolic_zero: false,
        worst,
    })
}

/// Sampled verification of the symmetry condition, with a symbolic fast path.
pub fn check_generator(
    sys: &DiffSystem,
    pair: &CharacteristicPair,
    cfg: &SampleConfig,
) -> Result<CheckReport, SlscError> {
    let r = slsc_residual(sys, pair);
    let seqs = sys.seqs().merged(&pair.seqs);
    check_exprs(sys, &r, &seqs, cfg, None)
}

/// As [`check_generator`], with each residual divided by `scale(n)`.
pub fn check_generator_scaled(
    sys: &DiffSystem,
    pair: &CharacteristicPair,
    cfg: &SampleConfig,
    scale: ResidualScale,
) -> Result<CheckReport, SlscError> {
    let r = slsc_residual(sys, pair);
    let seqs = sys.seqs().merged(&pair.seqs);
    check_exprs(sys, &r, &seqs, cfg, Some(scale))
}

/// Sampled verification of `X(w) = 0`.
pub fn check_invariant(
    sys: &DiffSystem,
    pair: &CharacteristicPair,
    w: &Expr,
    cfg: &SampleConfig,
) -> Result<CheckReport, SlscError> {
    let xw = apply_generator(sys, pair, w);
    let seqs = sys.seqs().merged(&pair.seqs);
    check_exprs(sys, &[xw], &seqs, cfg, None)
}

/// `[A, B]ᵢ = A(Q_{B,i}) − B(Q_{A,i})` with derivatives in `x[n]`, `y[n]` only.
pub fn commutator(
    a: &CharacteristicPair,
    b: &CharacteristicPair,
) -> Result<CharacteristicPair, SlscError> {
    let act = |p: &CharacteristicPair, f: &Expr| -> Expr {
        let mut terms = Vec::new();
        for c in Component::ALL {
            let d = f.diff(VarRef::new(c, 0));
            if !d.is_zero() {
                terms.push(Expr::mul(vec![p.component(c).clone(), d]));
            }
        }
        Expr::add(terms)
    };
    let mut q = Vec::with_capacity(2);
    for c in Component::ALL {
        let e = Expr::sub(act(a, b.component(c)), act(b, a.component(c)));
        let s = if e.size() <= SYMBOLIC_SIZE_LIMIT {
            e.simplify()
        } else {
            e
        };
        if s.max_offset().is_some_and(|m| m > 0) {
            return Err(SlscError::BracketNotPoint(s.to_string()));
        }
        q.push(s);
    }
    let seqs = a.seqs.merged(&b.seqs);
    CharacteristicPair::named(
        &format!("[{}, {}]", a.name, b.name),
        q[0].clone(),
        q[1].clone(),
        seqs,
    )
}

/// Parse characteristic files: `charpair <name>` blocks with `Q1 = ...` and `Q2 = ...`,
/// either inline or on following lines, plus file-wide `seq a(n) = ...` definitions.
pub fn parse_charpairs(src: &str) -> Result<Vec<CharacteristicPair>, SlscError> {
    let names = VarNames::default();
    let mut seqs = SeqTable::new();
    let mut blocks: Vec<(usize, String, Option<Expr>, Option<Expr>)> = Vec::new();
    for (line, body) in content_lines(src) {
        let (kw, rest) = keyword(body);
        match kw {
            "charpair" => {
                let (name, tail) = keyword(rest);
                if name.is_empty() {
                    return Err(FormatError::syntax(line, "missing characteristic name").into());
                }
                blocks.push((line, name.to_string(), None, None));
                if !tail.is_empty() {
                    assign_inline(tail, line, &names, blocks.last_mut().unwrap())?;
                }
            }
            "seq" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let name = lhs
                    .strip_suffix("(n)")
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FormatError::syntax(line, "expected 'seq <name>(n) = ...'"))?;
                seqs.insert(name, SeqDef::Expr(expr_at(rhs, &names, line)?));
            }
            "end" => {}
            _ => {
                let Some(block) = blocks.last_mut() else {
                    return Err(FormatError::syntax(line, "expected 'charpair <name>'").into());
                };
                assign_inline(body, line, &names, block)?;
            }
        }
    }
    let mut out = Vec::with_capacity(blocks.len());
    for (line, name, q1, q2) in blocks {
        let (Some(q1), Some(q2)) = (q1, q2) else {
            return Err(FormatError::syntax(line, format!("'{name}' needs both Q1 and Q2")).into());
        };
        out.push(CharacteristicPair::named(&name, q1, q2, seqs.clone())?);
    }
    Ok(out)
}

pub(crate) fn assign_inline(
    text: &str,
    line: usize,
    names: &VarNames,
    block: &mut (usize, String, Option<Expr>, Option<Expr>),
) -> Result<(), SlscError> {
    let (first, second) = match text.find("Q2") {
        Some(pos) if pos > 0 => (text[..pos].trim(), Some(text[pos..].trim())),
        _ => (text.trim(), None),
    };
    for part in std::iter::once(first).chain(second) {
        let (lhs, rhs) = assignment(part, line)?;
        let e = expr_at(rhs, names, line)?;
        match lhs {
            "Q1" => block.2 = Some(e),
            "Q2" => block.3 = Some(e),
            other => {
                return Err(FormatError::syntax(
                    line,
                    format!("expected Q1 or Q2, found '{other}'"),
                )
                .into())
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn swap() -> DiffSystem {
        DiffSystem::new("swap", [Expr::y(0), Expr::x(0)]).unwrap()
    }

    fn pair(q1: &str, q2: &str) -> CharacteristicPair {
        CharacteristicPair::new(parse(q1).unwrap(), parse(q2).unwrap()).unwrap()
    }

    #[test]
    fn scaling_is_symbolically_exact() {
        let r = slsc_residual(&swap(), &pair("x[n]", "y[n]"));
        assert!(r[0].simplifies_to_zero());
        assert!(r[1].simplifies_to_zero());
        let rep =
            check_generator(&swap(), &pair("x[n]", "y[n]"), &SampleConfig::default()).unwrap();
        assert!(rep.passed && rep.max_residual == 0.0);
    }

    #[test]
    fn constant_pair_fails_with_unit_residual() {
        let r = slsc_residual(&swap(), &pair("1", "0"));
        assert_eq!(r[0].simplify(), Expr::one());
        assert_eq!(r[1].simplify(), Expr::int(-1));
        let rep = check_generator(&swap(), &pair("1", "0"), &SampleConfig::default()).unwrap();
        assert!(!rep.passed);
        assert!((rep.max_residual - 1.0).abs() < 1e-15);
    }

    #[test]
    fn periodic_pairs_pass() {
        let i0 = "(1 + (-1)^n + i^n + (-i)^n)/4";
        let i2 = "(1 + (-1)^n - i^n - (-i)^n)/4";
        let rep = check_generator(&swap(), &pair(i0, i2), &SampleConfig::default()).unwrap();
        assert!(rep.passed, "{rep:?}");
    }

    #[test]
    fn non_point_rejected() {
        assert!(matches!(
            CharacteristicPair::new(Expr::x(1), Expr::y(0)),
            Err(SlscError::NonPoint(_))
        ));
    }

    #[test]
    fn bracket_with_scaling() {
        let x0 = pair("x[n]", "y[n]");
        let x1 = pair(
            "(1 + (-1)^n + i^n + (-i)^n)/4",
            "(1 + (-1)^n - i^n - (-i)^n)/4",
        );
        let br = commutator(&x0, &x1).unwrap();
        let expect = [
            Expr::neg(x1.q[0].clone()).simplify(),
            Expr::neg(x1.q[1].clone()).simplify(),
        ];
        assert_eq!(br.q, expect);
        let own = commutator(&x0, &x0).unwrap();
        assert!(own.q[0].is_zero() && own.q[1].is_zero());
    }

    #[test]
    fn constants_are_invariant() {
        let rep = check_invariant(
            &swap(),
            &pair("x[n]", "y[n]"),
            &Expr::one(),
            &SampleConfig::default(),
        )
        .unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn parses_charpair_blocks() {
        let src = "seq a(n) = (-1)^n\ncharpair A Q1 = x[n] Q2 = y[n]\ncharpair B\n  Q1 = a(n)\n  Q2 = 0\n";
        let ps = parse_charpairs(src).unwrap();
        assert_eq!(ps.len(), 2);
        assert_eq!(ps[0].q, [Expr::x(0), Expr::y(0)]);
        assert_eq!(ps[1].q[0], Expr::seq("a", 0));
        assert!(ps[1].seqs.contains("a"));
    }
}
