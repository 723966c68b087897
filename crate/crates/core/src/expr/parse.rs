use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;

use super::{CRat, Component, Expr, VarRef};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("parse error at column {col}: {msg}")]
pub struct ParseError {
    pub col: usize,
    pub msg: String,
}

/// Spellings of the two state variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarNames {
    pub x: String,
    pub y: String,
}

impl Default for VarNames {
    fn default() -> Self {
        VarNames {
            x: "x".into(),
            y: "y".into(),
        }
    }
}

impl VarNames {
    fn lookup(&self, name: &str) -> Option<Component> {
        if name == self.x {
            Some(Component::X)
        } else if name == self.y {
            Some(Component::Y)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(BigRational),
    Ident(String),
    Sym(char),
}

fn lex(src: &str) -> Result<Vec<(Tok, usize)>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c.is_ascii_digit()
            || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()))
        {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let int_part: String = chars[start..i].iter().collect();
            let mut frac_part = String::new();
            if i < chars.len() && chars[i] == '.' {
                i += 1;
                let fs = i;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
                frac_part = chars[fs..i].iter().collect();
            }
            let mut exp: i64 = 0;
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                let mut neg = false;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    neg = chars[j] == '-';
                    j += 1;
                }
                let es = j;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                if j > es {
                    let digits: String = chars[es..j].iter().collect();
                    exp = digits.parse().map_err(|_| ParseError {
                        col: start + 1,
                        msg: "exponent out of range".into(),
                    })?;
                    if neg {
                        exp = -exp;
                    }
                    i = j;
                }
            }
            out.push((Tok::Num(decimal(&int_part, &frac_part, exp)), start + 1));
        } else if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push((Tok::Ident(chars[start..i].iter().collect()), start + 1));
        } else if "+-*/^()[],".contains(c) {
            out.push((Tok::Sym(c), i + 1));
            i += 1;
        } else {
            return Err(ParseError {
                col: i + 1,
                msg: format!("unexpected character '{c}'"),
            });
        }
    }
    Ok(out)
}

fn decimal(int_part: &str, frac_part: &str, exp: i64) -> BigRational {
    let digits = format!("{int_part}{frac_part}");
    let mantissa: BigInt = if digits.is_empty() {
        BigInt::zero()
    } else {
        digits.parse().unwrap_or_default()
    };
    let scale = exp - frac_part.len() as i64;
    let ten = BigInt::from(10);
    let pow = num_traits::pow(ten, scale.unsigned_abs() as usize);
    if scale >= 0 {
        BigRational::from_integer(mantissa * pow)
    } else {
        BigRational::new(mantissa, pow)
    }
}

struct Parser<'a> {
    toks: Vec<(Tok, usize)>,
    pos: usize,
    names: &'a VarNames,
    end_col: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn col(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end_col, |(_, c)| *c)
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError {
            col: self.col(),
            msg: msg.into(),
        })
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(&Tok::Sym(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            self.err(format!("expected '{c}'"))
        }
    }

    fn expect_index(&mut self) -> Result<(), ParseError> {
        match self.peek() {
            Some(Tok::Ident(s)) if s == "n" => {
                self.pos += 1;
                Ok(())
            }
            _ => self.err("expected 'n'"),
        }
    }

    fn int(&mut self) -> Result<i64, ParseError> {
        match self.peek() {
            Some(Tok::Num(r)) if r.is_integer() => {
                let v = r.to_integer();
                self.pos += 1;
                i64::try_from(v).or_else(|_| self.err("integer out of range"))
            }
            _ => self.err("expected an integer"),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            if self.eat('+') {
                let t = self.term()?;
                acc = Expr::add(vec![acc, t]);
            } else if self.eat('-') {
                let t = self.term()?;
                acc = Expr::sub(acc, t);
            } else {
                return Ok(acc);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.unary()?;
        loop {
            if self.eat('*') {
                let t = self.unary()?;
                acc = Expr::mul(vec![acc, t]);
            } else if self.eat('/') {
                let t = self.unary()?;
                acc = Expr::div(acc, t);
            } else {
                return Ok(acc);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.eat('-') {
            Ok(Expr::neg(self.unary()?))
        } else if self.eat('+') {
            self.unary()
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let base = self.primary()?;
        if !self.eat('^') {
            return Ok(base);
        }
        let neg = self.eat('-');
        if !neg {
            self.eat('+');
        }
        if let Some(Tok::Num(r)) = self.peek() {
            if r.is_integer() {
                let k = self.int()?;
                let k = if neg { -k } else { k };
                let k = i32::try_from(k).or_else(|_| self.err("exponent out of range"))?;
                return Ok(Expr::powi(base, k));
            }
        }
        let e = self.primary()?;
        Ok(Expr::pow(base, if neg { Expr::neg(e) } else { e }))
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let Some((tok, _)) = self.toks.get(self.pos).cloned() else {
            return self.err("unexpected end of input");
        };
        match tok {
            Tok::Num(r) => {
                self.pos += 1;
                Ok(Expr::constant(CRat::real(r)))
            }
            Tok::Sym('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect(')')?;
                Ok(e)
            }
            Tok::Sym(c) => self.err(format!("unexpected '{c}'")),
            Tok::Ident(name) => {
                self.pos += 1;
                match name.as_str() {
                    "n" => return Ok(Expr::index()),
                    "i" => return Ok(Expr::imag()),
                    "ln" => {
                        self.expect('(')?;
                        let e = self.expr()?;
                        self.expect(')')?;
                        return Ok(Expr::ln(e));
                    }
                    _ => {}
                }
                if self.eat('[') {
                    let Some(comp) = self.names.lookup(&name) else {
                        return self.err(format!("unknown variable '{name}'"));
                    };
                    self.expect_index()?;
                    let mut offset = 0;
                    if self.eat('+') {
                        offset = self.int()?;
                    } else if self.peek() == Some(&Tok::Sym('-')) {
                        return self.err("negative offsets are not allowed");
                    }
                    self.expect(']')?;
                    let offset =
                        u32::try_from(offset).or_else(|_| self.err("offset out of range"))?;
                    Ok(Expr::var(VarRef::new(comp, offset)))
                } else if self.eat('(') {
                    self.expect_index()?;
                    let mut offset = 0;
                    if self.eat('+') {
                        offset = self.int()?;
                    } else if self.eat('-') {
                        offset = -self.int()?;
                    }
                    self.expect(')')?;
                    Ok(Expr::seq(&name, offset))
                } else if self.names.lookup(&name).is_some() {
                    self.err(format!(
                        "variable '{name}' needs an index such as {name}[n]"
                    ))
                } else {
                    Ok(Expr::sym(&name))
                }
            }
        }
    }
}

/// Parse with the default variable names `x` and `y`.
pub fn parse(src: &str) -> Result<Expr, ParseError> {
    parse_with(src, &VarNames::default())
}

pub fn parse_with(src: &str, names: &VarNames) -> Result<Expr, ParseError> {
    let toks = lex(src)?;
    let mut p = Parser {
        toks,
        pos: 0,
        names,
        end_col: src.chars().count() + 1,
    };
    if p.peek().is_none() {
        return p.err("empty expression");
    }
    let e = p.expr()?;
    if p.pos < p.toks.len() {
        return p.err("unexpected trailing input");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_system_right_hand_side() {
        let e = parse("(x[n]*y[n+1] + 1)/(x[n] + y[n+1])").unwrap();
        let expected = (Expr::x(0) * Expr::y(1) + Expr::one()) / (Expr::x(0) + Expr::y(1));
        assert_eq!(e, expected);
    }

    #[test]
    fn parses_periodic_tokens() {
        let e = parse("(1 + (-1)^n + i^n + (-i)^n)/4").unwrap();
        assert_eq!(e.to_string(), "(1 + (-1)^n + i^n + (-i)^n)/4");
    }

    #[test]
    fn decimals_are_exact() {
        assert_eq!(parse("2.5").unwrap(), Expr::ratio(5, 2));
        assert_eq!(parse("1e-3").unwrap(), Expr::ratio(1, 1000));
    }

    #[test]
    fn sequences_and_symbols() {
        assert_eq!(parse("a(n-1)").unwrap(), Expr::seq("a", -1));
        assert_eq!(parse("u").unwrap(), Expr::sym("u"));
    }

    #[test]
    fn rejects_bad_input() {
        assert!(parse("x[n-1]").is_err());
        assert!(parse("x").is_err());
        assert!(parse("1 +").is_err());
        assert!(parse("(x[n]").is_err());
        assert!(parse("z[n]").is_err());
        assert!(parse("").is_err());
        assert!(parse("x[n] $ 2").is_err());
    }

    #[test]
    fn custom_names() {
        let names = VarNames {
            x: "p".into(),
            y: "q".into(),
        };
        assert_eq!(
            parse_with("p[n+1]*q[n]", &names).unwrap(),
            Expr::x(1) * Expr::y(0)
        );
    }

    #[test]
    fn general_powers() {
        let e = parse("5^(1/2)").unwrap();
        assert_eq!(e.to_string(), "5^(1/2)");
        let e = parse("x[n]^-2").unwrap();
        assert_eq!(e, Expr::powi(Expr::x(0), -2));
        assert_eq!(parse("2^n").unwrap().to_string(), "2^n");
    }
}
