//! Difference systems `x[n+N] = ω₁`, `y[n+N] = ω₂`, closure of shifts under the dynamics,
//! and numerical orbits.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::expr::{
    Binding, Component, DomainBox, EvalError, Expr, Sampler, SeqDef, SeqTable, Substitution,
    VarNames, VarRef, EPS_DOM,
};
use crate::text::{assignment, content_lines, expr_at, keyword, FormatError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SystemError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("degenerate system: {0}")]
    Degenerate(String),
    #[error("invalid system: {0}")]
    Invalid(String),
    #[error("initial values violate the guard {guard} at n = {n}")]
    InitViolatesGuard { guard: String, n: i64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuardKind {
    Denominator,
    LogArgument,
    User,
}

/// Expression that must stay away from zero along orbits.
#[derive(Debug, Clone, PartialEq)]
pub struct Guard {
    pub expr: Expr,
    pub kind: GuardKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiffSystem {
    name: String,
    order: u32,
    names: VarNames,
    rhs: [Expr; 2],
    guards: Vec<Guard>,
    seqs: SeqTable,
}

/// Which partial derivatives of each right-hand side are numerically nonzero.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub name: String,
    pub order: u32,
    /// `[i][j]`: does ωᵢ depend on the j-th unknown at offset 0.
    pub depends_on_base: [[bool; 2]; 2],
    pub guards: Vec<String>,
}

impl DiffSystem {
    /// Second-order system with auto-derived guards.
    pub fn new(name: &str, rhs: [Expr; 2]) -> Result<Self, SystemError> {
        DiffSystem::with_order(name, 2, rhs, SeqTable::new(), Vec::new())
    }

    pub fn with_order(
        name: &str,
        order: u32,
        rhs: [Expr; 2],
        seqs: SeqTable,
        user_guards: Vec<Expr>,
    ) -> Result<Self, SystemError> {
        if order == 0 {
            return Err(SystemError::Invalid("order must be at least 1".into()));
        }
        for (c, w) in Component::ALL.iter().zip(&rhs) {
            if let Some(m) = w.max_offset() {
                if m >= order {
                    return Err(SystemError::Invalid(format!(
                        "right-hand side for {} uses offset {m}, at most {} allowed",
                        c.name(),
                        order - 1
                    )));
                }
            }
            if let Some(s) = w.syms().into_iter().next() {
                return Err(SystemError::Invalid(format!("unknown identifier '{s}'")));
            }
            for s in w.seq_names() {
                if !seqs.contains(&s) {
                    return Err(SystemError::Invalid(format!("undefined sequence '{s}'")));
                }
            }
        }
        let mut guards: Vec<Guard> = Vec::new();
        for w in &rhs {
            for g in w.singular_subexprs() {
                let kind = if is_log_arg(w, &g) {
                    GuardKind::LogArgument
                } else {
                    GuardKind::Denominator
                };
                if !guards.iter().any(|h| h.expr == g) {
                    guards.push(Guard { expr: g, kind });
                }
            }
        }
        for g in user_guards {
            guards.push(Guard {
                expr: g,
                kind: GuardKind::User,
            });
        }
        let sys = DiffSystem {
            name: name.to_string(),
            order,
            names: VarNames::default(),
            rhs,
            guards,
            seqs,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    pub fn rhs(&self) -> &[Expr; 2] {
        &self.rhs
    }

    pub fn omega(&self, c: Component) -> &Expr {
        &self.rhs[c.index()]
    }

    pub fn guards(&self) -> &[Guard] {
        &self.guards
    }

    pub fn seqs(&self) -> &SeqTable {
        &self.seqs
    }

    pub fn var_names(&self) -> &VarNames {
        &self.names
    }

    /// Numerical check that each ωᵢ depends on `x[n]` or `y[n]`.
    pub fn validate(&self) -> Result<ValidationReport, SystemError> {
        let mut sampler = Sampler::new(0x5EED, DomainBox::default());
        let mut dep = [[false; 2]; 2];
        for (i, w) in self.rhs.iter().enumerate() {
            for c in Component::ALL {
                let d = w.diff(VarRef::new(c, 0));
                if d.is_zero() {
                    continue;
                }
                for _ in 0..20 {
                    let n = sampler.index((0, 24));
                    let b = self.random_point(n, &mut sampler);
                    if let Ok(v) = d.eval(&b) {
                        if v.norm() > 1e-12 {
                            dep[i][c.index()] = true;
                            break;
                        }
                    }
                }
            }
            if !dep[i][0] && !dep[i][1] {
                let lhs = VarRef::new(Component::ALL[i], self.order);
                return Err(SystemError::Degenerate(format!(
                    "{lhs} does not depend on x[n] or y[n]"
                )));
            }
        }
        Ok(ValidationReport {
            name: self.name.clone(),
            order: self.order,
            depends_on_base: dep,
            guards: self.guards.iter().map(|g| g.expr.to_string()).collect(),
        })
    }

    /// Binding of all state variables below the order to box samples.
    pub fn random_point<'a>(&'a self, n: i64, sampler: &mut Sampler) -> Binding<'a> {
        let mut b = Binding::new(n).with_seqs(&self.seqs);
        for off in 0..self.order {
            for c in Component::ALL {
                b.set_var(VarRef::new(c, off), sampler.value());
            }
        }
        b
    }

    /// Eliminate every offset `>= N` by substituting the (shifted) right-hand sides.
    pub fn reduce(&self, e: &Expr) -> Expr {
        let Some(max) = e.max_offset() else {
            return e.clone();
        };
        if max < self.order {
            return e.clone();
        }
        let mut subst = Substitution::new();
        for extra in 0..=(max - self.order) {
            let mut level = Substitution::new();
            for c in Component::ALL {
                let shifted = self.omega(c).shift(extra).substitute(&subst);
                level.insert(VarRef::new(c, self.order + extra), shifted);
            }
            subst.extend(level);
        }
        e.substitute(&subst)
    }

    /// Shift by `k` under the dynamics; the result has offsets below the order.
    pub fn closure_shift(&self, e: &Expr, k: u32) -> Expr {
        let mut cur = self.reduce(e);
        for _ in 0..k {
            cur = self.reduce(&cur.shift(1));
        }
        cur
    }

    /// Evaluate guards on a binding; returns the first violated guard.
    fn violated_guard(&self, b: &Binding, real: bool) -> Option<String> {
        for g in &self.guards {
            match g.expr.eval(b) {
                Ok(v) => {
                    if v.norm() < EPS_DOM {
                        return Some(g.expr.to_string());
                    }
                    if real && g.kind == GuardKind::LogArgument && v.re <= 0.0 {
                        return Some(g.expr.to_string());
                    }
                }
                Err(_) => return Some(g.expr.to_string()),
            }
        }
        None
    }

    /// Orbit from `(x₀, y₀, x₁, y₁)` at index `n0`, covering `n0..=n0+steps`.
    pub fn iterate(
        &self,
        init: [Complex64; 4],
        n0: i64,
        steps: usize,
    ) -> Result<Trajectory, SystemError> {
        if self.order != 2 {
            return Err(SystemError::Invalid(
                "numerical orbits are implemented for second-order systems".into(),
            ));
        }
        let real = init.iter().all(|z| z.im == 0.0);
        let mut pts: Vec<[Complex64; 2]> = vec![[init[0], init[1]], [init[2], init[3]]];
        let b0 = self.state_binding(n0, &pts[0], &pts[1]);
        if let Some(g) = self.violated_guard(&b0, real) {
            return Err(SystemError::InitViolatesGuard { guard: g, n: n0 });
        }
        let mut termination = Termination::Completed;
        while pts.len() < steps + 1 {
            let k = pts.len() - 2;
            let n = n0 + k as i64;
            let b = self.state_binding(n, &pts[k], &pts[k + 1]);
            if let Some(g) = self.violated_guard(&b, real) {
                termination = Termination::GuardViolation { n, guard: g };
                break;
            }
            let next = match (self.rhs[0].eval(&b), self.rhs[1].eval(&b)) {
                (Ok(a), Ok(c)) => [a, c],
                (Err(e), _) | (_, Err(e)) => {
                    termination = Termination::GuardViolation {
                        n,
                        guard: e.to_string(),
                    };
                    break;
                }
            };
            pts.push(next);
        }
        pts.truncate(steps + 1);
        Ok(Trajectory {
            start: n0,
            points: pts,
            termination,
        })
    }

    pub fn state_binding<'a>(
        &'a self,
        n: i64,
        cur: &[Complex64; 2],
        next: &[Complex64; 2],
    ) -> Binding<'a> {
        Binding::new(n)
            .with_seqs(&self.seqs)
            .with_var(VarRef::x(0), cur[0])
            .with_var(VarRef::y(0), cur[1])
            .with_var(VarRef::x(1), next[0])
            .with_var(VarRef::y(1), next[1])
    }

    /// Parse the line-oriented system format.
    pub fn from_text(src: &str) -> Result<Self, SystemError> {
        parse_system(src)
    }
}

fn is_log_arg(e: &Expr, target: &Expr) -> bool {
    use crate::expr::Node;
    let mut found = false;
    fn walk(e: &Expr, target: &Expr, found: &mut bool) {
        if let Node::Ln(a) = e.node() {
            if a == target {
                *found = true;
            }
        }
        for c in e.children() {
            walk(c, target, found);
        }
    }
    walk(e, target, &mut found);
    found
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "kebab-case")]
pub enum Termination {
    Completed,
    GuardViolation { n: i64, guard: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub start: i64,
    pub points: Vec<[Complex64; 2]>,
    pub termination: Termination,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn index_of(&self, k: usize) -> i64 {
        self.start + k as i64
    }

    /// Largest imaginary part along the orbit is below `1e-10`.
    pub fn is_real(&self) -> bool {
        self.points
            .iter()
            .all(|p| p[0].im.abs() < 1e-10 && p[1].im.abs() < 1e-10)
    }

    /// Largest relative defect of the defining relations along the stored orbit.
    pub fn relation_defect(&self, sys: &DiffSystem) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..self.points.len().saturating_sub(2) {
            let b = sys.state_binding(self.index_of(k), &self.points[k], &self.points[k + 1]);
            for c in 0..2 {
                if let Ok(v) = sys.rhs[c].eval(&b) {
                    let got = self.points[k + 2][c];
                    worst = worst.max((v - got).norm() / (1.0 + got.norm()));
                }
            }
        }
        worst
    }
}

fn parse_system(src: &str) -> Result<DiffSystem, SystemError> {
    let mut name: Option<String> = None;
    let mut names = VarNames::default();
    let mut order: u32 = 2;
    let mut rhs_src: BTreeMap<usize, (usize, String)> = BTreeMap::new();
    let mut guards_src: Vec<(usize, String)> = Vec::new();
    let mut seqs = SeqTable::new();
    let mut ended = false;
    let mut last_line = 0;
    for (line, body) in content_lines(src) {
        last_line = line;
        if ended {
            return Err(FormatError::syntax(line, "content after 'end'").into());
        }
        let (kw, rest) = keyword(body);
        match kw {
            "system" => {
                if name.is_some() {
                    return Err(FormatError::syntax(line, "duplicate 'system' line").into());
                }
                if rest.is_empty() {
                    return Err(FormatError::syntax(line, "missing system name").into());
                }
                name = Some(rest.to_string());
            }
            _ if name.is_none() => {
                return Err(FormatError::syntax(line, "expected 'system <name>'").into());
            }
            "vars" => {
                let vs: Vec<&str> = rest.split(',').map(str::trim).collect();
                if vs.len() != 2 || vs.iter().any(|v| v.is_empty()) {
                    return Err(FormatError::syntax(line, "expected two variable names").into());
                }
                names = VarNames {
                    x: vs[0].to_string(),
                    y: vs[1].to_string(),
                };
            }
            "order" => {
                order = rest
                    .parse()
                    .map_err(|_| FormatError::syntax(line, "order must be a positive integer"))?;
            }
            "guard" => guards_src.push((line, rest.to_string())),
            "seq" => {
                let (lhs, rhs) = assignment(rest, line)?;
                let seq_name = lhs
                    .strip_suffix("(n)")
                    .filter(|s| !s.is_empty())
                    .ok_or_else(|| FormatError::syntax(line, "expected 'seq <name>(n) = ...'"))?;
                let e = expr_at(rhs, &names, line)?;
                if e.has_vars() {
                    return Err(FormatError::syntax(line, "sequences may depend on n only").into());
                }
                seqs.insert(seq_name.trim(), SeqDef::Expr(e));
            }
            "end" => ended = true,
            _ => {
                let (lhs, rhs) = assignment(body, line)?;
                let target = expr_at(lhs, &names, line)?;
                let crate::expr::Node::Var(v) = target.node() else {
                    return Err(
                        FormatError::syntax(line, format!("unknown directive '{kw}'")).into(),
                    );
                };
                if rhs_src.contains_key(&v.comp.index()) {
                    return Err(FormatError::syntax(line, "duplicate equation").into());
                }
                rhs_src.insert(v.comp.index(), (line, rhs.to_string()));
                if v.offset != order {
                    return Err(FormatError::syntax(
                        line,
                        format!("left-hand side must be at offset n+{order}"),
                    )
                    .into());
                }
            }
        }
    }
    let Some(name) = name else {
        return Err(FormatError::syntax(last_line.max(1), "empty system file").into());
    };
    if !ended {
        return Err(FormatError::syntax(last_line, "missing 'end'").into());
    }
    let mut rhs = Vec::with_capacity(2);
    for c in Component::ALL {
        let Some((line, src)) = rhs_src.get(&c.index()) else {
            return Err(FormatError::syntax(
                last_line,
                format!("missing equation for {}", c.name()),
            )
            .into());
        };
        let e = expr_at(src, &names, *line)?;
        if let Some(m) = e.max_offset() {
            if m >= order {
                return Err(FormatError::syntax(
                    *line,
                    format!("offset n+{m} not allowed on the right-hand side"),
                )
                .into());
            }
        }
        rhs.push(e);
    }
    let mut user_guards = Vec::new();
    for (line, src) in guards_src {
        user_guards.push(expr_at(&src, &names, line)?);
    }
    let rhs: [Expr; 2] = [rhs[0].clone(), rhs[1].clone()];
    let mut sys = DiffSystem::with_order(&name, order, rhs, seqs, user_guards)?;
    sys.names = names;
    Ok(sys)
}
