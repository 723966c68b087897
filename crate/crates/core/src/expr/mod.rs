//! Symbolic expressions over the index `n`, shifted state variables and named sequences.

mod calculus;
mod constant;
mod eval;
mod parse;
mod sample;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;
use std::ops;
use std::sync::Arc;

pub use calculus::Substitution;
pub use constant::{rationalize, CRat, Constant};
pub use eval::{Binding, EvalError, SeqDef, SeqTable, EPS_DOM};
pub use parse::{parse, parse_with, ParseError, VarNames};
pub use sample::{equal_numeric, random_binding, DomainBox, SampleConfig, Sampler, DEFAULT_SEED};

/// Which state variable.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Component {
    X,
    Y,
}

impl Component {
    pub const ALL: [Component; 2] = [Component::X, Component::Y];

    pub fn index(self) -> usize {
        match self {
            Component::X => 0,
            Component::Y => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Component::X => "x",
            Component::Y => "y",
        }
    }
}

/// `x[n+k]` or `y[n+k]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarRef {
    pub comp: Component,
    pub offset: u32,
}

impl VarRef {
    pub fn new(comp: Component, offset: u32) -> Self {
        VarRef { comp, offset }
    }

    pub fn x(offset: u32) -> Self {
        VarRef::new(Component::X, offset)
    }

    pub fn y(offset: u32) -> Self {
        VarRef::new(Component::Y, offset)
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.offset == 0 {
            write!(f, "{}[n]", self.comp.name())
        } else {
            write!(f, "{}[n+{}]", self.comp.name(), self.offset)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Node {
    Var(VarRef),
    Index,
    Const(Constant),
    /// Named sequence `a(n+offset)`.
    Seq {
        name: Arc<str>,
        offset: i64,
    },
    /// Free symbol, bound by name at evaluation time.
    Sym(Arc<str>),
    Add(Vec<Expr>),
    Mul(Vec<Expr>),
    Neg(Expr),
    Div(Expr, Expr),
    PowInt(Expr, i32),
    Pow(Expr, Expr),
    Ln(Expr),
}

/// Immutable, cheaply clonable expression tree.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Expr(Arc<Node>);

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}

impl Expr {
    fn from_node(node: Node) -> Self {
        Expr(Arc::new(node))
    }

    pub fn node(&self) -> &Node {
        &self.0
    }

    pub fn var(v: VarRef) -> Self {
        Expr::from_node(Node::Var(v))
    }

    pub fn x(offset: u32) -> Self {
        Expr::var(VarRef::x(offset))
    }

    pub fn y(offset: u32) -> Self {
        Expr::var(VarRef::y(offset))
    }

    pub fn index() -> Self {
        Expr::from_node(Node::Index)
    }

    pub fn constant(c: CRat) -> Self {
        Expr::from_node(Node::Const(Constant::new(c)))
    }

    pub fn int(v: i64) -> Self {
        Expr::constant(CRat::from_int(v))
    }

    pub fn ratio(num: i64, den: i64) -> Self {
        Expr::constant(CRat::from_ratio(num, den))
    }

    pub fn imag() -> Self {
        Expr::constant(CRat::i())
    }

    pub fn zero() -> Self {
        Expr::int(0)
    }

    pub fn one() -> Self {
        Expr::int(1)
    }

    pub fn seq(name: &str, offset: i64) -> Self {
        Expr::from_node(Node::Seq {
            name: Arc::from(name),
            offset,
        })
    }

    pub fn sym(name: &str) -> Self {
        Expr::from_node(Node::Sym(Arc::from(name)))
    }

    /// Sum; nested sums are flattened and an all-constant sum is folded.
    pub fn add(terms: Vec<Expr>) -> Self {
        let mut flat = Vec::with_capacity(terms.len());
        for t in terms {
            match t.node() {
                Node::Add(inner) => flat.extend(inner.iter().cloned()),
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Expr::zero(),
            1 => flat.pop().unwrap(),
            _ => {
                if let Some(cs) = all_consts(&flat) {
                    let sum = cs.iter().fold(CRat::zero(), |a, c| a.add(c));
                    Expr::constant(sum)
                } else {
                    Expr::from_node(Node::Add(flat))
                }
            }
        }
    }

    /// Product; nested products are flattened and an all-constant product is folded.
    pub fn mul(factors: Vec<Expr>) -> Self {
        let mut flat = Vec::with_capacity(factors.len());
        for t in factors {
            match t.node() {
                Node::Mul(inner) => flat.extend(inner.iter().cloned()),
                _ => flat.push(t),
            }
        }
        match flat.len() {
            0 => Expr::one(),
            1 => flat.pop().unwrap(),
            _ => {
                if let Some(cs) = all_consts(&flat) {
                    let prod = cs.iter().fold(CRat::one(), |a, c| a.mul(c));
                    Expr::constant(prod)
                } else {
                    Expr::from_node(Node::Mul(flat))
                }
            }
        }
    }

    pub fn neg(e: Expr) -> Self {
        match e.node() {
            Node::Const(c) => Expr::constant(c.exact().neg()),
            Node::Neg(inner) => inner.clone(),
            _ => Expr::from_node(Node::Neg(e)),
        }
    }

    pub fn sub(a: Expr, b: Expr) -> Self {
        Expr::add(vec![a, Expr::neg(b)])
    }

    pub fn div(a: Expr, b: Expr) -> Self {
        if let (Some(ca), Some(cb)) = (a.as_const(), b.as_const()) {
            if let Some(q) = ca.div(cb) {
                return Expr::constant(q);
            }
        }
        Expr::from_node(Node::Div(a, b))
    }

    pub fn powi(base: Expr, k: i32) -> Self {
        if let Some(c) = base.as_const() {
            if let Some(p) = c.powi(k) {
                return Expr::constant(p);
            }
        }
        Expr::from_node(Node::PowInt(base, k))
    }

    /// General power; an integer constant exponent becomes an integer power.
    pub fn pow(base: Expr, exponent: Expr) -> Self {
        if let Some(k) = exponent
            .as_const()
            .and_then(CRat::as_integer)
            .and_then(|k| i32::try_from(k).ok())
        {
            return Expr::powi(base, k);
        }
        Expr::from_node(Node::Pow(base, exponent))
    }

    pub fn ln(arg: Expr) -> Self {
        Expr::from_node(Node::Ln(arg))
    }

    /// `(-1)^n`
    pub fn alternating() -> Self {
        Expr::pow(Expr::int(-1), Expr::index())
    }

    /// `i^n`
    pub fn imag_power() -> Self {
        Expr::pow(Expr::imag(), Expr::index())
    }

    pub fn as_const(&self) -> Option<&CRat> {
        match self.node() {
            Node::Const(c) => Some(c.exact()),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const().is_some_and(CRat::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_const().is_some_and(CRat::is_one)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self.node() {
            Node::Var(_) | Node::Index | Node::Const(_) | Node::Seq { .. } | Node::Sym(_) => {
                vec![]
            }
            Node::Add(ts) | Node::Mul(ts) => ts.iter().collect(),
            Node::Neg(a) | Node::PowInt(a, _) | Node::Ln(a) => vec![a],
            Node::Div(a, b) | Node::Pow(a, b) => vec![a, b],
        }
    }

    /// Rebuild with each child replaced, through the smart builders.
    pub fn map_children(&self, mut f: impl FnMut(&Expr) -> Expr) -> Expr {
        match self.node() {
            Node::Var(_) | Node::Index | Node::Const(_) | Node::Seq { .. } | Node::Sym(_) => {
                self.clone()
            }
            Node::Add(ts) => Expr::add(ts.iter().map(&mut f).collect()),
            Node::Mul(ts) => Expr::mul(ts.iter().map(&mut f).collect()),
            Node::Neg(a) => Expr::neg(f(a)),
            Node::Div(a, b) => {
                let a = f(a);
                Expr::div(a, f(b))
            }
            Node::PowInt(a, k) => Expr::powi(f(a), *k),
            Node::Pow(a, b) => {
                let a = f(a);
                Expr::pow(a, f(b))
            }
            Node::Ln(a) => Expr::ln(f(a)),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    pub fn vars(&self) -> BTreeSet<VarRef> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Var(v) = e.node() {
                out.insert(*v);
            }
        });
        out
    }

    pub fn syms(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Sym(s) = e.node() {
                out.insert(s.to_string());
            }
        });
        out
    }

    pub fn seq_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Node::Seq { name, .. } = e.node() {
                out.insert(name.to_string());
            }
        });
        out
    }

    /// Largest shift offset among the state variables, if any occur.
    pub fn max_offset(&self) -> Option<u32> {
        self.vars().iter().map(|v| v.offset).max()
    }

    pub fn has_vars(&self) -> bool {
        !self.vars().is_empty()
    }

    pub fn depends_on_index(&self) -> bool {
        let mut found = false;
        self.visit(&mut |e| {
            if matches!(e.node(), Node::Index | Node::Seq { .. }) {
                found = true;
            }
        });
        found
    }

    /// Denominators, logarithm arguments and bases raised to negative powers.
    pub fn singular_subexprs(&self) -> Vec<Expr> {
        let mut out: Vec<Expr> = Vec::new();
        self.visit(&mut |e| {
            let cand = match e.node() {
                Node::Div(_, b) => Some(b.clone()),
                Node::Ln(a) => Some(a.clone()),
                Node::PowInt(b, k) if *k < 0 => Some(b.clone()),
                Node::Pow(b, _) => Some(b.clone()),
                _ => None,
            };
            if let Some(c) = cand {
                if c.as_const().is_none() && !out.contains(&c) {
                    out.push(c);
                }
            }
        });
        out
    }

    pub fn size(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |_| n += 1);
        n
    }
}

fn all_consts(es: &[Expr]) -> Option<Vec<&CRat>> {
    es.iter().map(Expr::as_const).collect()
}

fn is_atomic(e: &Expr) -> bool {
    match e.node() {
        Node::Var(_) | Node::Index | Node::Seq { .. } | Node::Sym(_) | Node::Ln(_) => true,
        Node::Const(c) => c.exact().is_nonneg_integer() || *c.exact() == CRat::i(),
        _ => false,
    }
}

struct Paren<'a>(&'a Expr);

impl fmt::Display for Paren<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.0)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Var(v) => write!(f, "{v}"),
            Node::Index => write!(f, "n"),
            Node::Const(c) => write!(f, "{}", c.exact()),
            Node::Seq { name, offset } => match offset {
                0 => write!(f, "{name}(n)"),
                k if *k > 0 => write!(f, "{name}(n+{k})"),
                k => write!(f, "{name}(n-{})", -k),
            },
            Node::Sym(s) => write!(f, "{s}"),
            Node::Add(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    match t.node() {
                        Node::Neg(inner) if i > 0 => {
                            if matches!(inner.node(), Node::Add(_)) {
                                write!(f, " - {}", Paren(inner))?
                            } else {
                                write!(f, " - {inner}")?
                            }
                        }
                        Node::Const(c) if i > 0 && c.exact().is_negative_real() => {
                            write!(f, " - {}", c.exact().neg())?
                        }
                        Node::Add(_) => {
                            if i > 0 {
                                write!(f, " + ")?;
                            }
                            write!(f, "{}", Paren(t))?
                        }
                        _ => {
                            if i > 0 {
                                write!(f, " + ")?;
                            }
                            write!(f, "{t}")?
                        }
                    }
                }
                Ok(())
            }
            Node::Mul(ts) => {
                for (i, t) in ts.iter().enumerate() {
                    if i > 0 {
                        write!(f, "*")?;
                    }
                    let wrap = match t.node() {
                        Node::Add(_) | Node::Mul(_) => true,
                        Node::Neg(_) | Node::Div(..) => i > 0,
                        _ => false,
                    };
                    if wrap {
                        write!(f, "{}", Paren(t))?
                    } else {
                        write!(f, "{t}")?
                    }
                }
                Ok(())
            }
            Node::Neg(a) => {
                if matches!(
                    a.node(),
                    Node::Add(_) | Node::Mul(_) | Node::Div(..) | Node::Neg(_)
                ) {
                    write!(f, "-{}", Paren(a))
                } else {
                    write!(f, "-{a}")
                }
            }
            Node::Div(a, b) => {
                if matches!(a.node(), Node::Add(_)) {
                    write!(f, "{}", Paren(a))?
                } else {
                    write!(f, "{a}")?
                }
                write!(f, "/")?;
                if matches!(
                    b.node(),
                    Node::Add(_) | Node::Mul(_) | Node::Div(..) | Node::Neg(_)
                ) {
                    write!(f, "{}", Paren(b))
                } else {
                    write!(f, "{b}")
                }
            }
            Node::PowInt(b, k) => {
                fmt_base(f, b)?;
                write!(f, "^{k}")
            }
            Node::Pow(b, e) => {
                fmt_base(f, b)?;
                if matches!(
                    e.node(),
                    Node::Index | Node::Var(_) | Node::Seq { .. } | Node::Sym(_) | Node::Const(_)
                ) {
                    write!(f, "^{e}")
                } else {
                    write!(f, "^{}", Paren(e))
                }
            }
            Node::Ln(a) => write!(f, "ln({a})"),
        }
    }
}

fn fmt_base(f: &mut fmt::Formatter<'_>, b: &Expr) -> fmt::Result {
    match b.node() {
        // Constants such as (-1) or (1/2) already carry their own parentheses.
        Node::Const(_) => write!(f, "{b}"),
        _ if is_atomic(b) => write!(f, "{b}"),
        _ => write!(f, "{}", Paren(b)),
    }
}

impl ops::Add for Expr {
    type Output = Expr;
    fn add(self, rhs: Expr) -> Expr {
        Expr::add(vec![self, rhs])
    }
}

impl ops::Sub for Expr {
    type Output = Expr;
    fn sub(self, rhs: Expr) -> Expr {
        Expr::sub(self, rhs)
    }
}

impl ops::Mul for Expr {
    type Output = Expr;
    fn mul(self, rhs: Expr) -> Expr {
        Expr::mul(vec![self, rhs])
    }
}

impl ops::Div for Expr {
    type Output = Expr;
    fn div(self, rhs: Expr) -> Expr {
        Expr::div(self, rhs)
    }
}

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::neg(self)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::int(v)
    }
}

impl std::str::FromStr for Expr {
    type Err = ParseError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}
