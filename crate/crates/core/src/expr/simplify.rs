//! Canonical Laurent-polynomial form over opaque atoms.
//!
//! Everything that is not a sum, product, negation, integer power or quotient by a
//! monomial becomes an atom keyed by its printed (already simplified) form. Powers of
//! `i^n` are reduced modulo 4, which also canonicalises `(-1)^n` and `(-i)^n`.

use std::collections::BTreeMap;

use super::{CRat, Expr, Node};

type Monomial = BTreeMap<String, i64>;

const MAX_EXPAND: i32 = 16;
const MAX_TERMS: usize = 20_000;
const IPOW: &str = "i^n";

#[derive(Clone, Debug, Default)]
struct Poly {
    terms: BTreeMap<Monomial, CRat>,
}

struct Ctx {
    atoms: BTreeMap<String, Expr>,
}

impl Poly {
    fn constant(c: CRat) -> Poly {
        let mut p = Poly::default();
        if !c.is_zero() {
            p.terms.insert(Monomial::new(), c);
        }
        p
    }

    fn atom(key: String, exp: i64) -> Poly {
        let mut m = Monomial::new();
        m.insert(key, exp);
        let mut p = Poly::default();
        p.terms.insert(normalize(m), CRat::one());
        p
    }

    fn add_term(&mut self, m: Monomial, c: CRat) {
        let m = canonical(m);
        let entry = self.terms.entry(m.clone()).or_insert_with(CRat::zero);
        *entry = entry.add(&c);
        if entry.is_zero() {
            self.terms.remove(&m);
        }
    }

    fn add(mut self, o: &Poly) -> Poly {
        for (m, c) in &o.terms {
            self.add_term(m.clone(), c.clone());
        }
        self
    }

    fn scale(&self, c: &CRat) -> Poly {
        let mut out = Poly::default();
        if c.is_zero() {
            return out;
        }
        for (m, v) in &self.terms {
            out.terms.insert(m.clone(), v.mul(c));
        }
        out
    }

    fn mul(&self, o: &Poly) -> Option<Poly> {
        if self.terms.len().saturating_mul(o.terms.len()) > MAX_TERMS {
            return None;
        }
        let mut out = Poly::default();
        for (m1, c1) in &self.terms {
            for (m2, c2) in &o.terms {
                let mut m = m1.clone();
                for (k, e) in m2 {
                    *m.entry(k.clone()).or_insert(0) += e;
                }
                out.add_term(normalize(m), c1.mul(c2));
            }
        }
        Some(out)
    }

    fn as_monomial(&self) -> Option<(&Monomial, &CRat)> {
        if self.terms.len() == 1 {
            self.terms.iter().next()
        } else {
            None
        }
    }

    fn as_constant(&self) -> Option<CRat> {
        match self.terms.len() {
            0 => Some(CRat::zero()),
            1 => {
                let (m, c) = self.terms.iter().next().unwrap();
                m.is_empty().then(|| c.clone())
            }
            _ => None,
        }
    }
}

fn normalize(m: Monomial) -> Monomial {
    m.into_iter().filter(|(_, e)| *e != 0).collect()
}

/// Drops zero exponents and reduces the exponent of `i^n` modulo 4.
fn canonical(mut m: Monomial) -> Monomial {
    if let Some(e) = m.get_mut(IPOW) {
        *e = e.rem_euclid(4);
    }
    normalize(m)
}

impl Ctx {
    fn atom_poly(&mut self, e: Expr, exp: i64) -> Poly {
        let key = e.to_string();
        self.atoms.entry(key.clone()).or_insert(e);
        Poly::atom(key, exp)
    }

    fn to_poly(&mut self, e: &Expr) -> Poly {
        match e.node() {
            Node::Const(c) => Poly::constant(c.exact().clone()),
            Node::Var(_) | Node::Index | Node::Seq { .. } | Node::Sym(_) => {
                self.atom_poly(e.clone(), 1)
            }
            Node::Add(ts) => {
                let mut acc = Poly::default();
                for t in ts {
                    let p = self.to_poly(t);
                    acc = acc.add(&p);
                }
                acc
            }
            Node::Mul(ts) => {
                let mut acc = Poly::constant(CRat::one());
                for t in ts {
                    let p = self.to_poly(t);
                    acc = match acc.mul(&p) {
                        Some(q) => q,
                        None => return self.opaque(e),
                    };
                }
                acc
            }
            Node::Neg(a) => self.to_poly(a).scale(&CRat::from_int(-1)),
            Node::Div(a, b) => {
                let num = self.to_poly(a);
                let den = self.to_poly(b);
                let inv = self.inverse(den);
                num.mul(&inv).unwrap_or_else(|| self.opaque(e))
            }
            Node::PowInt(a, k) => {
                let base = self.to_poly(a);
                self.power(base, *k).unwrap_or_else(|| self.opaque(e))
            }
            Node::Pow(a, w) => {
                let base = self.to_poly(a);
                let expo = self.to_poly(w);
                self.general_power(base, expo)
            }
            Node::Ln(a) => {
                let arg = from_poly(&self.to_poly(a), &self.atoms);
                self.atom_poly(Expr::ln(arg), 1)
            }
        }
    }

    fn opaque(&mut self, e: &Expr) -> Poly {
        self.atom_poly(e.clone(), 1)
    }

    fn inverse(&mut self, den: Poly) -> Poly {
        if let Some((m, c)) = den.as_monomial() {
            if let Some(ic) = c.recip() {
                let mut inv = Monomial::new();
                for (k, e) in m {
                    inv.insert(k.clone(), -e);
                }
                let mut p = Poly::default();
                p.add_term(inv, ic);
                return p;
            }
        }
        // Make the atom independent of an overall constant factor.
        let lead = den.terms.values().next().cloned().unwrap_or_else(CRat::one);
        let lead_inv = lead.recip().unwrap_or_else(CRat::one);
        let normed = den.scale(&lead_inv);
        let atom = from_poly(&normed, &self.atoms);
        self.atom_poly(atom, -1).scale(&lead_inv)
    }

    fn power(&mut self, base: Poly, k: i32) -> Option<Poly> {
        if k == 0 {
            return Some(Poly::constant(CRat::one()));
        }
        if let Some((m, c)) = base.as_monomial() {
            let coeff = c.powi(k)?;
            let mut out = Monomial::new();
            for (a, e) in m {
                out.insert(a.clone(), e * i64::from(k));
            }
            let mut p = Poly::default();
            p.add_term(out, coeff);
            return Some(p);
        }
        let (b, kk) = if k < 0 {
            (self.inverse(base), -k)
        } else {
            (base, k)
        };
        if kk > MAX_EXPAND {
            let atom = from_poly(&b, &self.atoms);
            return Some(self.atom_poly(atom, i64::from(kk)));
        }
        let mut acc = Poly::constant(CRat::one());
        for _ in 0..kk {
            acc = acc.mul(&b)?;
        }
        Some(acc)
    }

    fn general_power(&mut self, base: Poly, expo: Poly) -> Poly {
        if let Some(k) = expo.as_constant().and_then(|c| c.as_integer()) {
            if let Ok(k) = i32::try_from(k) {
                if let Some(p) = self.power(base.clone(), k) {
                    return p;
                }
            }
        }
        if let Some(c) = base.as_constant() {
            // c^(n + j) with c a fourth root of unity
            if let Some(j) = index_plus_integer(&expo) {
                let unit = if c == CRat::i() {
                    Some(1)
                } else if c == CRat::from_int(-1) {
                    Some(2)
                } else if c == CRat::i().neg() {
                    Some(3)
                } else {
                    None
                };
                if let Some(u) = unit {
                    let mut m = Monomial::new();
                    m.insert(IPOW.to_string(), u);
                    let shift = c.powi(j as i32).unwrap_or_else(CRat::one);
                    self.atoms
                        .entry(IPOW.to_string())
                        .or_insert_with(Expr::imag_power);
                    let mut p = Poly::default();
                    p.add_term(m, shift);
                    return p;
                }
                if j != 0 && !c.is_zero() {
                    let shift = c.powi(j as i32).unwrap_or_else(CRat::one);
                    let atom = Expr::pow(Expr::constant(c), Expr::index());
                    return self.atom_poly(atom, 1).scale(&shift);
                }
            }
        }
        let b = from_poly(&base, &self.atoms);
        let w = from_poly(&expo, &self.atoms);
        self.atom_poly(Expr::pow(b, w), 1)
    }
}

/// `Some(j)` when the polynomial is exactly `n + j`.
fn index_plus_integer(p: &Poly) -> Option<i64> {
    let mut j = 0;
    let mut saw_index = false;
    for (m, c) in &p.terms {
        if m.is_empty() {
            j = c.as_integer()?;
        } else if m.len() == 1 && m.get("n") == Some(&1) && c.is_one() {
            saw_index = true;
        } else {
            return None;
        }
    }
    saw_index.then_some(j)
}

fn atom_power(key: &str, e: i64, atoms: &BTreeMap<String, Expr>) -> Expr {
    if key == IPOW {
        return match e.rem_euclid(4) {
            1 => Expr::imag_power(),
            2 => Expr::alternating(),
            3 => Expr::pow(Expr::constant(CRat::i().neg()), Expr::index()),
            _ => Expr::one(),
        };
    }
    let base = atoms[key].clone();
    if e == 1 {
        base
    } else {
        Expr::powi(base, i32::try_from(e).unwrap_or(i32::MAX))
    }
}

fn from_poly(p: &Poly, atoms: &BTreeMap<String, Expr>) -> Expr {
    let mut terms = Vec::with_capacity(p.terms.len());
    for (m, c) in &p.terms {
        let factors: Vec<Expr> = m.iter().map(|(k, e)| atom_power(k, *e, atoms)).collect();
        let term = if factors.is_empty() {
            Expr::constant(c.clone())
        } else if c.is_one() {
            Expr::mul(factors)
        } else if *c == CRat::from_int(-1) {
            Expr::neg(Expr::mul(factors))
        } else {
            let mut fs = vec![Expr::constant(c.clone())];
            fs.extend(factors);
            Expr::mul(fs)
        };
        terms.push(term);
    }
    Expr::add(terms)
}

impl Expr {
    /// Sound algebraic normal form; zero-equivalent polynomial parts collapse to `0`.
    pub fn simplify(&self) -> Expr {
        let mut ctx = Ctx {
            atoms: BTreeMap::new(),
        };
        let p = ctx.to_poly(self);
        from_poly(&p, &ctx.atoms)
    }

    /// True when the normal form is exactly zero.
    pub fn simplifies_to_zero(&self) -> bool {
        self.simplify().is_zero()
    }
}
