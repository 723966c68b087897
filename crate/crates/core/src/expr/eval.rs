use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use super::{Expr, Node, VarRef};

/// Magnitude below which a denominator or logarithm argument counts as singular.
pub const EPS_DOM: f64 = 1e-8;

const MAX_SEQ_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound symbol '{0}'")]
    Unbound(String),
    #[error("division by a near-zero value")]
    NearZeroDivision,
    #[error("logarithm of a near-zero value")]
    NearZeroLog,
    #[error("negative power of a near-zero value")]
    NearZeroPower,
    #[error("sequence '{name}' has no value at n = {index}")]
    SeqOutOfRange { name: String, index: i64 },
    #[error("sequence definitions nest too deeply at '{0}'")]
    SeqRecursion(String),
    #[error("non-finite value")]
    NonFinite,
}

impl EvalError {
    /// True for failures caused by a point outside the domain, as opposed to a malformed expression.
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            EvalError::NearZeroDivision
                | EvalError::NearZeroLog
                | EvalError::NearZeroPower
                | EvalError::NonFinite
        )
    }
}

/// How a named sequence `a(n)` is obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum SeqDef {
    /// A closed form in `n`, possibly referring to other sequences.
    Expr(Expr),
    /// Tabulated values starting at index `start`.
    Table { start: i64, values: Vec<Complex64> },
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SeqTable {
    defs: BTreeMap<String, SeqDef>,
}

impl SeqTable {
    pub fn new() -> Self {
        SeqTable::default()
    }

    pub fn insert(&mut self, name: &str, def: SeqDef) {
        self.defs.insert(name.to_string(), def);
    }

    pub fn with(mut self, name: &str, def: SeqDef) -> Self {
        self.insert(name, def);
        self
    }

    pub fn get(&self, name: &str) -> Option<&SeqDef> {
        self.defs.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.defs.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.defs.keys().map(String::as_str)
    }

    pub fn is_empty(&self) -> bool {
        self.defs.is_empty()
    }

    /// Union of two tables; entries of `other` win on name clashes.
    pub fn merged(&self, other: &SeqTable) -> SeqTable {
        let mut out = self.clone();
        for (k, v) in &other.defs {
            out.defs.insert(k.clone(), v.clone());
        }
        out
    }

    pub fn value(&self, name: &str, n: i64) -> Result<Complex64, EvalError> {
        self.value_at_depth(name, n, 0)
    }

    fn value_at_depth(&self, name: &str, n: i64, depth: usize) -> Result<Complex64, EvalError> {
        if depth > MAX_SEQ_DEPTH {
            return Err(EvalError::SeqRecursion(name.to_string()));
        }
        match self.defs.get(name) {
            None => Err(EvalError::Unbound(format!("{name}(n)"))),
            Some(SeqDef::Table { start, values }) => {
                let idx = n - start;
                usize::try_from(idx)
                    .ok()
                    .and_then(|i| values.get(i).copied())
                    .ok_or_else(|| EvalError::SeqOutOfRange {
                        name: name.to_string(),
                        index: n,
                    })
            }
            Some(SeqDef::Expr(e)) => {
                let b = Binding::new(n).with_seqs(self);
                eval_node(e, &b, depth + 1)
            }
        }
    }
}

/// Values for everything an expression may mention.
#[derive(Debug, Clone)]
pub struct Binding<'a> {
    pub n: i64,
    vars: BTreeMap<VarRef, Complex64>,
    syms: Vec<(Arc<str>, Complex64)>,
    seqs: Option<&'a SeqTable>,
}

impl<'a> Binding<'a> {
    pub fn new(n: i64) -> Self {
        Binding {
            n,
            vars: BTreeMap::new(),
            syms: Vec::new(),
            seqs: None,
        }
    }

    pub fn with_seqs(mut self, seqs: &'a SeqTable) -> Self {
        self.seqs = Some(seqs);
        self
    }

    pub fn with_var(mut self, v: VarRef, value: impl Into<Complex64>) -> Self {
        self.set_var(v, value);
        self
    }

    pub fn with_sym(mut self, name: &str, value: impl Into<Complex64>) -> Self {
        self.set_sym(name, value);
        self
    }

    pub fn set_var(&mut self, v: VarRef, value: impl Into<Complex64>) {
        self.vars.insert(v, value.into());
    }

    pub fn set_sym(&mut self, name: &str, value: impl Into<Complex64>) {
        let value = value.into();
        if let Some(slot) = self.syms.iter_mut().find(|(k, _)| &**k == name) {
            slot.1 = value;
        } else {
            self.syms.push((Arc::from(name), value));
        }
    }

    pub fn var(&self, v: VarRef) -> Option<Complex64> {
        self.vars.get(&v).copied()
    }

    pub fn seqs(&self) -> Option<&'a SeqTable> {
        self.seqs
    }
}

impl Expr {
    pub fn eval(&self, b: &Binding) -> Result<Complex64, EvalError> {
        eval_node(self, b, 0)
    }

    /// Real part of the value, rejecting results with a non-negligible imaginary part.
    pub fn eval_real(&self, b: &Binding) -> Result<f64, EvalError> {
        let z = self.eval(b)?;
        if z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
            return Err(EvalError::NonFinite);
        }
        Ok(z.re)
    }
}

fn check(z: Complex64) -> Result<Complex64, EvalError> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(EvalError::NonFinite)
    }
}

fn eval_node(e: &Expr, b: &Binding, depth: usize) -> Result<Complex64, EvalError> {
    let z = match e.node() {
        Node::Var(v) => b.var(*v).ok_or_else(|| EvalError::Unbound(v.to_string()))?,
        Node::Index => Complex64::new(b.n as f64, 0.0),
        Node::Const(c) => c.approx(),
        Node::Seq { name, offset } => {
            let table = b
                .seqs
                .ok_or_else(|| EvalError::Unbound(format!("{name}(n)")))?;
            table.value_at_depth(name, b.n + offset, depth)?
        }
        Node::Sym(s) => b
            .syms
            .iter()
            .find(|(k, _)| k == s)
            .map(|(_, v)| *v)
            .ok_or_else(|| EvalError::Unbound(s.to_string()))?,
        Node::Add(ts) => {
            let mut acc = Complex64::new(0.0, 0.0);
            for t in ts {
                acc += eval_node(t, b, depth)?;
            }
            acc
        }
        Node::Mul(ts) => {
            let mut acc = Complex64::new(1.0, 0.0);
            for t in ts {
                acc *= eval_node(t, b, depth)?;
            }
            acc
        }
        Node::Neg(a) => -eval_node(a, b, depth)?,
        Node::Div(a, d) => {
            let den = eval_node(d, b, depth)?;
            if den.norm() < EPS_DOM {
                return Err(EvalError::NearZeroDivision);
            }
            eval_node(a, b, depth)? / den
        }
        Node::PowInt(a, k) => {
            let base = eval_node(a, b, depth)?;
            int_power(base, *k)?
        }
        Node::Pow(a, w) => {
            let base = eval_node(a, b, depth)?;
            let w = eval_node(w, b, depth)?;
            general_power(base, w)?
        }
        Node::Ln(a) => {
            let arg = eval_node(a, b, depth)?;
            if arg.norm() < EPS_DOM {
                return Err(EvalError::NearZeroLog);
            }
            arg.ln()
        }
    };
    check(z)
}

fn int_power(base: Complex64, k: i32) -> Result<Complex64, EvalError> {
    if k < 0 && base.norm() < EPS_DOM {
        return Err(EvalError::NearZeroPower);
    }
    // Exact unit powers keep (-1)^n and i^n free of rounding.
    if base.im == 0.0 && base.re == -1.0 {
        return Ok(Complex64::new(
            if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 },
            0.0,
        ));
    }
    if base.re == 0.0 && base.im.abs() == 1.0 {
        let r = if base.im > 0.0 {
            k.rem_euclid(4)
        } else {
            (-k).rem_euclid(4)
        };
        return Ok(match r {
            0 => Complex64::new(1.0, 0.0),
            1 => Complex64::new(0.0, 1.0),
            2 => Complex64::new(-1.0, 0.0),
            _ => Complex64::new(0.0, -1.0),
        });
    }
    if base.im == 0.0 {
        return Ok(Complex64::new(base.re.powi(k), 0.0));
    }
    Ok(base.powi(k))
}

fn general_power(base: Complex64, w: Complex64) -> Result<Complex64, EvalError> {
    if w.im == 0.0 && w.re.fract() == 0.0 && w.re.abs() < i32::MAX as f64 {
        return int_power(base, w.re as i32);
    }
    if base.norm() < EPS_DOM {
        return if w.re > 0.0 {
            Ok(Complex64::new(0.0, 0.0))
        } else {
            Err(EvalError::NearZeroPower)
        };
    }
    if base.im == 0.0 && base.re > 0.0 && w.im == 0.0 {
        return Ok(Complex64::new(base.re.powf(w.re), 0.0));
    }
    Ok((w * base.ln()).exp())
}
