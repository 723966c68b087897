use std::collections::BTreeMap;

use crate::expr::{Component, Expr, Node, VarRef};

use super::ConservationError;

/// Exponents of `(x[n], y[n], x[n+1], y[n+1])`.
pub type Monomial = [u32; 4];

/// Polynomial in the four window variables with index-dependent coefficients.
#[derive(Debug, Clone, Default)]
pub struct Poly {
    terms: BTreeMap<Monomial, Vec<Expr>>,
}

pub fn slot(v: VarRef) -> Option<usize> {
    match (v.comp, v.offset) {
        (Component::X, 0) => Some(0),
        (Component::Y, 0) => Some(1),
        (Component::X, 1) => Some(2),
        (Component::Y, 1) => Some(3),
        _ => None,
    }
}

pub fn window_var(i: usize) -> VarRef {
    match i {
        0 => VarRef::x(0),
        1 => VarRef::y(0),
        2 => VarRef::x(1),
        _ => VarRef::y(1),
    }
}

impl Poly {
    fn constant(c: Expr) -> Self {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert([0; 4], vec![c]);
        }
        p
    }

    fn monomial(m: Monomial) -> Self {
        let mut p = Poly::default();
        p.terms.insert(m, vec![Expr::one()]);
        p
    }

    fn add(mut self, other: Poly) -> Self {
        for (m, cs) in other.terms {
            self.terms.entry(m).or_default().extend(cs);
        }
        self
    }

    fn scale(self, c: &Expr) -> Self {
        let terms = self
            .terms
            .into_iter()
            .map(|(m, cs)| (m, vec![Expr::mul(vec![c.clone(), Expr::add(cs)])]))
            .collect();
        Poly { terms }
    }

    fn mul(&self, other: &Poly) -> Self {
        let mut out = Poly::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                let m = [ma[0] + mb[0], ma[1] + mb[1], ma[2] + mb[2], ma[3] + mb[3]];
                let c = Expr::mul(vec![Expr::add(ca.clone()), Expr::add(cb.clone())]);
                out.terms.entry(m).or_default().push(c);
            }
        }
        out
    }

    /// Expand an expression that is polynomial in the window variables.
    pub fn from_expr(e: &Expr) -> Result<Self, ConservationError> {
        if !e.has_vars() {
            return Ok(Poly::constant(e.clone()));
        }
        let unsupported = || ConservationError::NonPolynomial(e.to_string());
        match e.node() {
            Node::Var(v) => {
                let i = slot(*v).ok_or_else(unsupported)?;
                let mut m = [0; 4];
                m[i] = 1;
                Ok(Poly::monomial(m))
            }
            Node::Add(ts) => ts
                .iter()
                .try_fold(Poly::default(), |acc, t| Ok(acc.add(Poly::from_expr(t)?))),
            Node::Mul(fs) => fs
                .iter()
                .try_fold(Poly::constant(Expr::one()), |acc, f| {
                    Ok(acc.mul(&Poly::from_expr(f)?))
                }),
            Node::Neg(a) => Ok(Poly::from_expr(a)?.scale(&Expr::int(-1))),
            Node::PowInt(b, k) if *k >= 0 => {
                let base = Poly::from_expr(b)?;
                let mut acc = Poly::constant(Expr::one());
                for _ in 0..*k {
                    acc = acc.mul(&base);
                }
                Ok(acc)
            }
            Node::Div(a, b) if !b.has_vars() => {
                Ok(Poly::from_expr(a)?.scale(&Expr::div(Expr::one(), b.clone())))
            }
            _ => Err(unsupported()),
        }
    }

    /// Simplified coefficient of each monomial, zero coefficients dropped.
    pub fn coefficients(&self) -> Vec<(Monomial, Expr)> {
        self.terms
            .iter()
            .map(|(m, cs)| (*m, Expr::add(cs.clone()).simplify()))
            .filter(|(_, c)| !c.is_zero())
            .collect()
    }
}

pub fn monomial_expr(m: &Monomial) -> Expr {
    let factors: Vec<Expr> = m
        .iter()
        .enumerate()
        .filter(|(_, k)| **k > 0)
        .map(|(i, k)| {
            let v = Expr::var(window_var(i));
            if *k == 1 {
                v
            } else {
                Expr::powi(v, *k as i32)
            }
        })
        .collect();
    Expr::mul(factors)
}

/// `φ(z) = Σᵢ zᵢ ∫₀¹ gᵢ(t·z) dt` for a closed polynomial 1-form `g`, normalised to `φ(0) = 0`.
pub fn homotopy_integral(gradient: &[Expr; 4]) -> Result<Expr, ConservationError> {
    let mut acc = Poly::default();
    for (i, gi) in gradient.iter().enumerate() {
        for (m, c) in Poly::from_expr(gi)?.coefficients() {
            let degree: u32 = m.iter().sum();
            let mut raised = m;
            raised[i] += 1;
            let term = Poly {
                terms: BTreeMap::from([(raised, vec![Expr::mul(vec![Expr::ratio(1, degree as i64 + 1), c])])]),
            };
            acc = acc.add(term);
        }
    }
    let terms: Vec<Expr> = acc
        .coefficients()
        .into_iter()
        .map(|(m, c)| {
            let mono = monomial_expr(&m);
            if mono.is_one() {
                c
            } else if c.is_one() {
                mono
            } else {
                Expr::mul(vec![c, mono])
            }
        })
        .collect();
    Ok(Expr::add(terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, Binding};

    #[test]
    fn expands_products() {
        let p = Poly::from_expr(&parse("(x[n] + 2*y[n+1])^2 - a(n)*x[n]/3").unwrap()).unwrap();
        let c = p.coefficients();
        assert_eq!(c.len(), 4);
        assert!(c.iter().any(|(m, e)| *m == [2, 0, 0, 0] && e.is_one()));
    }

    #[test]
    fn rejects_non_polynomial() {
        assert!(Poly::from_expr(&parse("ln(x[n])").unwrap()).is_err());
        assert!(Poly::from_expr(&parse("1/x[n]").unwrap()).is_err());
        assert!(Poly::from_expr(&parse("x[n+2]").unwrap()).is_err());
    }

    #[test]
    fn recovers_a_potential() {
        // grad of x0*x1 + 3*y0*y1 + y1
        let g = [
            parse("x[n+1]").unwrap(),
            parse("3*y[n+1]").unwrap(),
            parse("x[n]").unwrap(),
            parse("3*y[n] + 1").unwrap(),
        ];
        let phi = homotopy_integral(&g).unwrap();
        let b = Binding::new(0)
            .with_var(VarRef::x(0), 1.3)
            .with_var(VarRef::y(0), -0.4)
            .with_var(VarRef::x(1), 2.1)
            .with_var(VarRef::y(1), 0.7);
        let want = 1.3 * 2.1 + 3.0 * -0.4 * 0.7 + 0.7;
        assert!((phi.eval(&b).unwrap().re - want).abs() < 1e-14);
    }
}
