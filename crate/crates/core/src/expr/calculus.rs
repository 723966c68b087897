use std::collections::BTreeMap;

use super::{Expr, Node, VarRef};

/// Simultaneous replacement of state variables.
pub type Substitution = BTreeMap<VarRef, Expr>;

fn s_add(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        b
    } else if b.is_zero() {
        a
    } else {
        Expr::add(vec![a, b])
    }
}

fn s_mul(factors: Vec<Expr>) -> Expr {
    if factors.iter().any(Expr::is_zero) {
        return Expr::zero();
    }
    Expr::mul(factors.into_iter().filter(|f| !f.is_one()).collect())
}

fn s_neg(a: Expr) -> Expr {
    if a.is_zero() {
        a
    } else {
        Expr::neg(a)
    }
}

fn s_div(a: Expr, b: Expr) -> Expr {
    if a.is_zero() {
        a
    } else if b.is_one() {
        a
    } else {
        Expr::div(a, b)
    }
}

impl Expr {
    /// Partial derivative with respect to a state variable.
    pub fn diff(&self, v: VarRef) -> Expr {
        self.diff_by(&|e| matches!(e.node(), Node::Var(w) if *w == v))
    }

    /// Partial derivative with respect to a free symbol.
    pub fn diff_sym(&self, name: &str) -> Expr {
        self.diff_by(&|e| matches!(e.node(), Node::Sym(s) if &**s == name))
    }

    /// Partial derivative with respect to the sequence value `name(n+offset)`.
    pub fn diff_seq(&self, name: &str, offset: i64) -> Expr {
        self.diff_by(&|e| {
            matches!(e.node(), Node::Seq { name: m, offset: o } if &**m == name && *o == offset)
        })
    }

    fn diff_by(&self, is_target: &dyn Fn(&Expr) -> bool) -> Expr {
        match self.node() {
            Node::Var(_) | Node::Sym(_) | Node::Seq { .. } => {
                if is_target(self) {
                    Expr::one()
                } else {
                    Expr::zero()
                }
            }
            Node::Index | Node::Const(_) => Expr::zero(),
            Node::Add(ts) => ts
                .iter()
                .map(|t| t.diff_by(is_target))
                .fold(Expr::zero(), s_add),
            Node::Mul(ts) => {
                let mut acc = Expr::zero();
                for i in 0..ts.len() {
                    let d = ts[i].diff_by(is_target);
                    if d.is_zero() {
                        continue;
                    }
                    let mut fs: Vec<Expr> = Vec::with_capacity(ts.len());
                    for (j, t) in ts.iter().enumerate() {
                        fs.push(if i == j { d.clone() } else { t.clone() });
                    }
                    acc = s_add(acc, s_mul(fs));
                }
                acc
            }
            Node::Neg(a) => s_neg(a.diff_by(is_target)),
            Node::Div(a, b) => {
                let da = a.diff_by(is_target);
                let db = b.diff_by(is_target);
                let first = s_div(da, b.clone());
                if db.is_zero() {
                    first
                } else {
                    let second = s_div(s_mul(vec![a.clone(), db]), Expr::powi(b.clone(), 2));
                    s_add(first, s_neg(second))
                }
            }
            Node::PowInt(a, k) => {
                let da = a.diff_by(is_target);
                if da.is_zero() {
                    return Expr::zero();
                }
                let lower = if *k == 1 {
                    Expr::one()
                } else {
                    Expr::powi(a.clone(), k - 1)
                };
                s_mul(vec![Expr::int(i64::from(*k)), lower, da])
            }
            Node::Pow(a, w) => {
                let da = a.diff_by(is_target);
                let dw = w.diff_by(is_target);
                let mut acc = Expr::zero();
                if !da.is_zero() {
                    let lower = Expr::pow(a.clone(), Expr::sub(w.clone(), Expr::one()));
                    acc = s_mul(vec![w.clone(), lower, da]);
                }
                if !dw.is_zero() {
                    acc = s_add(acc, s_mul(vec![self.clone(), Expr::ln(a.clone()), dw]));
                }
                acc
            }
            Node::Ln(a) => s_div(a.diff_by(is_target), a.clone()),
        }
    }

    /// Replace `n` by `n + k` throughout.
    pub fn shift(&self, k: u32) -> Expr {
        if k == 0 {
            return self.clone();
        }
        match self.node() {
            Node::Var(v) => Expr::var(VarRef::new(v.comp, v.offset + k)),
            Node::Index => Expr::add(vec![Expr::index(), Expr::int(i64::from(k))]),
            Node::Seq { name, offset } => Expr::seq(name, offset + i64::from(k)),
            _ => self.map_children(|c| c.shift(k)),
        }
    }

    /// Simultaneously replace the variables in `subst`.
    pub fn substitute(&self, subst: &Substitution) -> Expr {
        match self.node() {
            Node::Var(v) => subst.get(v).cloned().unwrap_or_else(|| self.clone()),
            Node::Index | Node::Const(_) | Node::Seq { .. } | Node::Sym(_) => self.clone(),
            _ => self.map_children(|c| c.substitute(subst)),
        }
    }

    /// Simultaneously replace free symbols.
    pub fn substitute_syms(&self, subst: &BTreeMap<String, Expr>) -> Expr {
        match self.node() {
            Node::Sym(s) => subst.get(&**s).cloned().unwrap_or_else(|| self.clone()),
            Node::Var(_) | Node::Index | Node::Const(_) | Node::Seq { .. } => self.clone(),
            _ => self.map_children(|c| c.substitute_syms(subst)),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Binding};

    fn at(e: &Expr, x: f64, y: f64) -> f64 {
        let b = Binding::new(3)
            .with_var(VarRef::x(0), x)
            .with_var(VarRef::y(1), y);
        e.eval(&b).unwrap().re
    }

    #[test]
    fn quotient_rule() {
        let w = parse("(x[n]*y[n+1] + 1)/(x[n] + y[n+1])").unwrap();
        let d = w.diff(VarRef::x(0));
        // (y^2 - 1)/(x + y)^2
        let (x, y) = (2.0, 3.0);
        assert!((at(&d, x, y) - (y * y - 1.0) / (x + y).powi(2)).abs() < 1e-14);
        assert!(w.diff(VarRef::y(0)).is_zero());
    }

    #[test]
    fn log_and_powers() {
        let e = parse("ln((x[n] + 1)/(x[n] - 1))").unwrap();
        let d = e.diff(VarRef::x(0));
        let x = 3.0;
        assert!((at(&d, x, 0.0) - (-2.0 / (x * x - 1.0))).abs() < 1e-14);
        let p = parse("x[n]^(1/2)").unwrap().diff(VarRef::x(0));
        assert!((at(&p, 4.0, 0.0) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn shift_moves_everything() {
        let e = parse("n*x[n]*a(n-1) + y[n+1]").unwrap();
        assert_eq!(e.shift(2).to_string(), "(n + 2)*x[n+2]*a(n+1) + y[n+3]");
    }

    #[test]
    fn substitution_is_simultaneous() {
        let e = parse("x[n] + 2*y[n]").unwrap();
        let mut s = Substitution::new();
        s.insert(VarRef::x(0), Expr::y(0));
        s.insert(VarRef::y(0), Expr::x(0));
        assert_eq!(e.substitute(&s), parse("y[n] + 2*x[n]").unwrap());
    }
}
