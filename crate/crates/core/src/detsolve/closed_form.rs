//! Recognition of periodic and geometric closed forms for tabulated sequences.

use num_bigint::BigInt;
use num_complex::Complex64;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::expr::{Binding, CRat, Expr};

use super::linalg::{least_squares, CMatrix, CVector};

pub const MIN_LENGTH: usize = 16;
const MAX_PERIOD: usize = 8;
const MAX_ORDER: usize = 4;
const MAX_DEN: i64 = 1000;
const MATCH_TOL: f64 = 1e-9;

/// Closed form `F(n)` for `values[t] = F(start + t)`, if one is recognised.
pub fn match_closed_form(values: &[Complex64], start: i64) -> Option<Expr> {
    if values.len() < MIN_LENGTH {
        return None;
    }
    let scale = values.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if !scale.is_finite() {
        return None;
    }
    let tol = MATCH_TOL * scale.max(1.0);
    if scale <= tol {
        return Some(Expr::zero());
    }
    let candidate = match period(values, tol) {
        Some(p) => periodic_form(values, start, p),
        None => geometric_form(values, start),
    }?;
    reproduces(&candidate, values, start, tol).then_some(candidate)
}

fn reproduces(e: &Expr, values: &[Complex64], start: i64, tol: f64) -> bool {
    values.iter().enumerate().all(|(t, v)| {
        e.eval(&Binding::new(start + t as i64))
            .is_ok_and(|z| (z - v).norm() <= tol)
    })
}

fn period(values: &[Complex64], tol: f64) -> Option<usize> {
    (1..=MAX_PERIOD)
        .filter(|p| 2 * p <= values.len())
        .find(|&p| (0..values.len() - p).all(|t| (values[t] - values[t + p]).norm() <= tol))
}

fn exact(z: Complex64) -> Option<CRat> {
    CRat::approximate(z, MAX_DEN, 1e-9 * z.norm().max(1.0))
}

fn crat_int(v: &BigInt) -> CRat {
    CRat::real(BigRational::from_integer(v.clone()))
}

/// `c·base`, dropping unit factors.
fn scaled(c: &CRat, base: Expr) -> Expr {
    if c.is_one() {
        base
    } else if base.is_one() {
        Expr::constant(c.clone())
    } else if *c == CRat::from_int(-1) {
        Expr::neg(base)
    } else {
        Expr::mul(vec![Expr::constant(c.clone()), base])
    }
}

fn denominator_lcm<'a>(cs: impl Iterator<Item = &'a CRat>) -> BigInt {
    cs.fold(BigInt::one(), |acc, c| {
        acc.lcm(c.re.denom()).lcm(c.im.denom())
    })
}

/// Value at residue `r` of `n mod p`.
fn residue_value(values: &[Complex64], start: i64, p: usize, r: usize) -> Complex64 {
    values[(r as i64 - start).rem_euclid(p as i64) as usize]
}

fn periodic_form(values: &[Complex64], start: i64, p: usize) -> Option<Expr> {
    let w: Vec<CRat> = (0..p)
        .map(|r| exact(residue_value(values, start, p, r)))
        .collect::<Option<_>>()?;
    if 4 % p == 0 {
        return Some(fourth_roots_form(&w, p));
    }
    // Indicator of n ≡ r (mod p) as an average over the p-th roots of unity.
    let mut terms = Vec::new();
    for (r, v) in w.iter().enumerate() {
        if v.is_zero() {
            continue;
        }
        let mut roots = vec![Expr::one()];
        for k in 1..p {
            let exponent = Expr::mul(vec![
                Expr::ratio(2 * k as i64, p as i64),
                Expr::sub(Expr::index(), Expr::int(r as i64)),
            ]);
            roots.push(Expr::pow(Expr::int(-1), exponent));
        }
        let c = v.div(&CRat::from_int(p as i64))?;
        terms.push(scaled(&c, Expr::add(roots)));
    }
    Some(Expr::add(terms))
}

/// Exact discrete Fourier expansion in `1, (-1)^n, i^n, (-i)^n`.
fn fourth_roots_form(w: &[CRat], p: usize) -> Expr {
    let roots = [CRat::one(), CRat::from_int(-1), CRat::i(), CRat::i().neg()];
    let quarter = CRat::from_ratio(1, 4);
    let coeffs: Vec<CRat> = roots
        .iter()
        .map(|omega| {
            let inv = omega.recip().expect("unit root");
            let mut acc = CRat::zero();
            for r in 0..4 {
                let wr = &w[r % p];
                acc = acc.add(&wr.mul(&inv.powi(r as i32).expect("unit root")));
            }
            acc.mul(&quarter)
        })
        .collect();
    let lcm = denominator_lcm(coeffs.iter());
    let l = crat_int(&lcm);
    let mut terms = Vec::new();
    for (c, omega) in coeffs.iter().zip(&roots) {
        if c.is_zero() {
            continue;
        }
        let base = if omega.is_one() {
            Expr::one()
        } else {
            Expr::pow(Expr::constant(omega.clone()), Expr::index())
        };
        terms.push(scaled(&c.mul(&l), base));
    }
    let sum = Expr::add(terms);
    if lcm.is_one() {
        sum
    } else {
        Expr::div(sum, Expr::constant(l))
    }
}

type Poly = Vec<BigRational>;

fn rat(v: i64) -> BigRational {
    BigRational::from_integer(BigInt::from(v))
}

/// Shortest recurrence `v[t+d] = Σ a_j v[t+j]` with small rational coefficients.
fn find_recurrence(values: &[Complex64]) -> Option<Vec<BigRational>> {
    for d in 1..=MAX_ORDER {
        let rows = values.len().checked_sub(d)?;
        if rows < d + 4 {
            return None;
        }
        let mut a = CMatrix::zeros(rows, d);
        let mut b = CVector::zeros(rows);
        for t in 0..rows {
            let m = (0..=d).map(|j| values[t + j].norm()).fold(0.0, f64::max);
            let s = if m > 0.0 { 1.0 / m } else { 1.0 };
            for j in 0..d {
                a[(t, j)] = values[t + j] * s;
            }
            b[t] = values[t + d] * s;
        }
        let sol = least_squares(&a, &b);
        let Some(coeffs) = sol
            .iter()
            .map(|z| {
                let c = CRat::approximate(*z, MAX_DEN, 1e-7 * z.norm().max(1.0))?;
                c.is_real().then_some(c.re)
            })
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let fl: Vec<f64> = coeffs
            .iter()
            .map(|c| c.to_f64().unwrap_or(f64::NAN))
            .collect();
        let holds = (0..rows).all(|t| {
            let m = (0..=d).map(|j| values[t + j].norm()).fold(0.0, f64::max);
            let pred: Complex64 = (0..d).map(|j| values[t + j] * fl[j]).sum();
            (pred - values[t + d]).norm() <= 1e-8 * m.max(1e-300)
        });
        if holds {
            return Some(coeffs);
        }
    }
    None
}

fn poly_mul(a: &Poly, b: &Poly) -> Poly {
    let mut out = vec![BigRational::zero(); a.len() + b.len() - 1];
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// Divide by `λ − r`; `None` unless exact.
fn deflate(p: &Poly, r: &BigRational) -> Option<Poly> {
    let d = p.len() - 1;
    let mut q = vec![BigRational::zero(); d];
    let mut carry = BigRational::zero();
    for k in (0..=d).rev() {
        let c = &p[k] + &carry * r;
        if k == 0 {
            return c.is_zero().then_some(q);
        }
        q[k - 1] = c.clone();
        carry = c;
    }
    None
}

fn divisors(n: &BigInt) -> Option<Vec<BigInt>> {
    let n = n.abs().to_i64()?;
    if n == 0 || n > 1_000_000 {
        return None;
    }
    Some((1..=n).filter(|k| n % k == 0).map(BigInt::from).collect())
}

/// Rational roots by the rational root theorem, with the remaining factor.
fn rational_roots(p: &Poly) -> Option<(Vec<BigRational>, Poly)> {
    let mut p = p.clone();
    let mut roots = Vec::new();
    loop {
        if p.len() <= 1 {
            return Some((roots, p));
        }
        let lcm = p.iter().fold(BigInt::one(), |acc, c| acc.lcm(c.denom()));
        let ints: Vec<BigInt> = p
            .iter()
            .map(|c| (c * BigRational::from_integer(lcm.clone())).to_integer())
            .collect();
        if ints[0].is_zero() {
            return None;
        }
        let num = divisors(&ints[0])?;
        let den = divisors(&ints[ints.len() - 1])?;
        let mut found = None;
        'search: for a in &num {
            for b in &den {
                for sign in [1, -1] {
                    let r = BigRational::new(a * sign, b.clone());
                    if let Some(q) = deflate(&p, &r) {
                        found = Some((r, q));
                        break 'search;
                    }
                }
            }
        }
        match found {
            Some((r, q)) => {
                roots.push(r);
                p = q;
            }
            None => return Some((roots, p)),
        }
    }
}

fn durand_kerner(p: &Poly) -> Vec<Complex64> {
    let d = p.len() - 1;
    let lead = p[d].to_f64().unwrap_or(1.0);
    let c: Vec<f64> = p.iter().map(|x| x.to_f64().unwrap_or(0.0) / lead).collect();
    let eval = |z: Complex64| {
        c.iter()
            .rev()
            .fold(Complex64::new(0.0, 0.0), |acc, k| acc * z + k)
    };
    let seed = Complex64::new(0.4, 0.9);
    let mut z: Vec<Complex64> = (0..d).map(|k| seed.powu(k as u32)).collect();
    for _ in 0..500 {
        for i in 0..d {
            let mut den = Complex64::new(1.0, 0.0);
            for j in 0..d {
                if i != j {
                    den *= z[i] - z[j];
                }
            }
            let step = eval(z[i]) / den;
            z[i] -= step;
        }
    }
    z
}

/// Split an irreducible quartic into two rational monic quadratics.
fn quadratic_pairs(p: &Poly) -> Option<Vec<Poly>> {
    match p.len() - 1 {
        0 => Some(vec![]),
        2 => {
            let lead = p[2].clone();
            Some(vec![p.iter().map(|c| c / &lead).collect()])
        }
        4 => {
            let lead = p[4].clone();
            let monic: Poly = p.iter().map(|c| c / &lead).collect();
            let z = durand_kerner(&monic);
            for (i, j, k, l) in [(0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2)] {
                let quad = |a: Complex64, b: Complex64| -> Option<Poly> {
                    let s = CRat::approximate(a + b, MAX_DEN, 1e-8)?;
                    let q = CRat::approximate(a * b, MAX_DEN, 1e-8)?;
                    (s.is_real() && q.is_real()).then(|| vec![q.re, -s.re, BigRational::one()])
                };
                if let (Some(f), Some(g)) = (quad(z[i], z[j]), quad(z[k], z[l])) {
                    if poly_mul(&f, &g) == monic {
                        return Some(vec![f, g]);
                    }
                }
            }
            None
        }
        _ => None,
    }
}

/// A characteristic root, exactly and numerically.
struct Root {
    expr: Expr,
    value: Complex64,
    /// `Some((sign, surd))` for roots `u ± w·surd` of a rational quadratic.
    surd: Option<(i8, Expr, Complex64)>,
}

fn square_free(n: &BigInt) -> Option<(i64, i64)> {
    let mut m = n.abs().to_i64()?;
    let mut k = 1;
    let mut f = 2;
    while f * f <= m {
        while m % (f * f) == 0 {
            m /= f * f;
            k *= f;
        }
        f += 1;
    }
    Some((k, m))
}

fn quadratic_roots(q: &Poly) -> Option<[Root; 2]> {
    // λ² + bλ + c
    let (c, b) = (&q[0], &q[1]);
    let disc = b * b - rat(4) * c;
    let neg = disc.is_negative();
    let n = disc.numer() * disc.denom();
    let (k, m) = square_free(&n)?;
    let u = -b / rat(2);
    let w = BigRational::new(BigInt::from(k), disc.denom() * BigInt::from(2));
    let mut surd = Expr::pow(Expr::int(m), Expr::ratio(1, 2));
    let mut surd_val = Complex64::new((m as f64).sqrt(), 0.0);
    if m == 1 {
        surd = Expr::one();
    }
    if neg {
        surd = if surd.is_one() {
            Expr::imag()
        } else {
            Expr::mul(vec![Expr::imag(), surd])
        };
        surd_val *= Complex64::new(0.0, 1.0);
    }
    let l = u.denom().lcm(w.denom());
    let lr = BigRational::from_integer(l.clone());
    let make = |sign: i8| -> Root {
        let ws = if sign > 0 { w.clone() } else { -w.clone() };
        let mut parts = Vec::new();
        if !u.is_zero() {
            parts.push(Expr::constant(CRat::real(&u * &lr)));
        }
        parts.push(scaled(&CRat::real(&ws * &lr), surd.clone()));
        let num = Expr::add(parts);
        let expr = if l.is_one() {
            num
        } else {
            Expr::div(num, Expr::constant(crat_int(&l)))
        };
        let value = Complex64::new(u.to_f64().unwrap_or(f64::NAN), 0.0)
            + surd_val * ws.to_f64().unwrap_or(f64::NAN);
        Root {
            expr,
            value,
            surd: Some((sign, surd.clone(), surd_val)),
        }
    };
    Some([make(1), make(-1)])
}

fn geometric_form(values: &[Complex64], start: i64) -> Option<Expr> {
    let a = find_recurrence(values)?;
    let d = a.len();
    let mut poly: Poly = a.iter().map(|c| -c.clone()).collect();
    poly.push(BigRational::one());
    let (rationals, rest) = rational_roots(&poly)?;
    let mut roots: Vec<Root> = rationals
        .iter()
        .map(|r| Root {
            expr: Expr::constant(CRat::real(r.clone())),
            value: Complex64::new(r.to_f64().unwrap_or(f64::NAN), 0.0),
            surd: None,
        })
        .collect();
    for q in quadratic_pairs(&rest)? {
        roots.extend(quadratic_roots(&q)?);
    }
    if roots.len() != d {
        return None;
    }
    for i in 0..d {
        for j in i + 1..d {
            if (roots[i].value - roots[j].value).norm() < 1e-9 {
                return None;
            }
        }
    }
    // Scaled Vandermonde fit.
    let rows = values.len();
    let mut m = CMatrix::zeros(rows, d);
    for (j, r) in roots.iter().enumerate() {
        for t in 0..rows {
            m[(t, j)] = power(r.value, start + t as i64);
        }
    }
    let norms: Vec<f64> = (0..d).map(|j| m.column(j).norm()).collect();
    for (j, nj) in norms.iter().enumerate() {
        if *nj == 0.0 {
            return None;
        }
        m.column_mut(j).scale_mut(1.0 / nj);
    }
    let rhs = CVector::from_iterator(rows, values.iter().copied());
    let sol = least_squares(&m, &rhs);
    let coeffs: Vec<Complex64> = sol.iter().zip(&norms).map(|(c, n)| c / n).collect();
    let mut terms = Vec::new();
    let mut j = 0;
    while j < d {
        let r = &roots[j];
        match &r.surd {
            None => {
                let c = exact(coeffs[j])?;
                if !c.is_zero() {
                    terms.push(scaled(&c, Expr::pow(r.expr.clone(), Expr::index())));
                }
                j += 1;
            }
            Some((_, surd, surd_val)) => {
                let (cp, cm) = (coeffs[j], coeffs[j + 1]);
                let p = exact((cp + cm) / 2.0)?;
                let q = exact((cp - cm) / (2.0 * surd_val))?;
                for (k, sign) in [(j, 1), (j + 1, -1)] {
                    let qs = if sign > 0 { q.clone() } else { q.neg() };
                    let mut parts = Vec::new();
                    if !p.is_zero() {
                        parts.push(Expr::constant(p.clone()));
                    }
                    if !qs.is_zero() {
                        parts.push(scaled(&qs, surd.clone()));
                    }
                    if parts.is_empty() {
                        continue;
                    }
                    let coeff = Expr::add(parts);
                    let base = Expr::pow(roots[k].expr.clone(), Expr::index());
                    terms.push(if coeff.is_one() {
                        base
                    } else {
                        Expr::mul(vec![coeff, base])
                    });
                }
                j += 2;
            }
        }
    }
    Some(Expr::add(terms))
}

fn power(z: Complex64, n: i64) -> Complex64 {
    if z.im == 0.0 {
        Complex64::new(z.re.powi(n as i32), 0.0)
    } else {
        z.powi(n as i32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seq(f: impl Fn(i64) -> f64, len: i64) -> Vec<Complex64> {
        (0..len).map(|n| Complex64::new(f(n), 0.0)).collect()
    }

    #[test]
    fn period_four_indicator() {
        let v = seq(|n| if n % 4 == 0 { 1.0 } else { 0.0 }, 24);
        let e = match_closed_form(&v, 0).unwrap();
        assert_eq!(e.to_string(), "(1 + (-1)^n + i^n + (-i)^n)/4");
    }

    #[test]
    fn period_two() {
        let v = seq(|n| if n % 2 == 0 { 1.0 } else { 0.0 }, 20);
        assert_eq!(
            match_closed_form(&v, 0).unwrap().to_string(),
            "(1 + (-1)^n)/2"
        );
    }

    #[test]
    fn period_three_and_offset_start() {
        let v = seq(|n| [2.0, -1.0, 0.5][((n + 5) % 3) as usize], 20);
        let e = match_closed_form(&v, 5).unwrap();
        for (t, z) in v.iter().enumerate() {
            let got = e.eval(&Binding::new(5 + t as i64)).unwrap();
            assert!((got - z).norm() < 1e-12);
        }
    }

    #[test]
    fn golden_ratio_quartic() {
        // F(n+2) = F(n) + G(n+1), G(n+2) = G(n) + F(n+1)
        let (mut f, mut g) = (vec![1.0, 0.0], vec![0.0, 1.0]);
        for k in 0..22 {
            f.push(f[k] + g[k + 1]);
            g.push(g[k] + f[k + 1]);
        }
        let v: Vec<Complex64> = f.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        let e = match_closed_form(&v, 0).unwrap();
        assert!(e.to_string().contains("5^(1/2)"), "{e}");
    }

    #[test]
    fn fibonacci() {
        let mut v = vec![0.0, 1.0];
        for k in 0..20 {
            v.push(v[k] + v[k + 1]);
        }
        let v: Vec<Complex64> = v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
        let e = match_closed_form(&v, 0).unwrap();
        assert!(e.to_string().contains("(1 + 5^(1/2))/2"), "{e}");
    }

    #[test]
    fn pure_geometric_and_no_match() {
        let v = seq(|n| 3.0 * 2f64.powi(n as i32), 20);
        assert_eq!(match_closed_form(&v, 0).unwrap().to_string(), "3*2^n");
        let w = seq(|n| ((n * n) as f64).sqrt().sin() + 0.1 * n as f64, 20);
        assert!(match_closed_form(&w, 0).is_none());
        assert!(match_closed_form(&v[..10], 0).is_none());
    }
}
