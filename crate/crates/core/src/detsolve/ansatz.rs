use crate::expr::{parse, Binding, Component, DomainBox, Expr, Sampler, VarNames, VarRef};
use crate::text::{content_lines, expr_at, keyword, split_top_level, FormatError};

use super::linalg::{decompose, CMatrix};
use super::DetError;

/// Gram matrices with a larger condition number are rejected.
pub const GRAM_CONDITION_LIMIT: f64 = 1e10;
const GRAM_POINTS: usize = 200;

/// Basis functions for each characteristic component: `Qᵢ = Σⱼ Fᵢⱼ(n)·bᵢⱼ(x[n], y[n])`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnsatzBasis {
    pub name: String,
    pub q1: Vec<Expr>,
    pub q2: Vec<Expr>,
}

impl AnsatzBasis {
    pub fn new(name: &str, q1: Vec<Expr>, q2: Vec<Expr>) -> Result<Self, DetError> {
        let a = AnsatzBasis {
            name: name.to_string(),
            q1,
            q2,
        };
        for b in a.q1.iter().chain(&a.q2) {
            if b.max_offset().is_some_and(|m| m > 0) || !b.syms().is_empty() || b.depends_on_index()
            {
                return Err(DetError::BadAnsatz(format!(
                    "basis element {b} must depend on x[n] and y[n] only"
                )));
            }
        }
        if a.q1.is_empty() && a.q2.is_empty() {
            return Err(DetError::BadAnsatz("empty basis".into()));
        }
        let cond = a.gram_condition(DomainBox::default(), 0x5EED);
        if !(cond < GRAM_CONDITION_LIMIT) {
            return Err(DetError::BadAnsatz(format!(
                "basis functions are numerically dependent (Gram condition {cond:.3e})"
            )));
        }
        Ok(a)
    }

    /// `{x[n], y[n], 1}` for both components.
    pub fn affine() -> Self {
        let b = vec![Expr::x(0), Expr::y(0), Expr::one()];
        AnsatzBasis::new("affine", b.clone(), b).expect("affine basis is independent")
    }

    /// `{x, x²−1, (x²−1)·ln((x+1)/(x−1))}` for Q₁ and the `y` analogue for Q₂.
    pub fn loglinear() -> Self {
        let family = |v: &str| {
            vec![
                parse(&format!("{v}[n]")).unwrap(),
                parse(&format!("{v}[n]^2 - 1")).unwrap(),
                parse(&format!("({v}[n]^2 - 1)*ln(({v}[n] + 1)/({v}[n] - 1))")).unwrap(),
            ]
        };
        AnsatzBasis::new("loglinear", family("x"), family("y"))
            .expect("loglinear basis is independent")
    }

    /// Sequences only: `Qᵢ = Fᵢ(n)`.
    pub fn constant() -> Self {
        AnsatzBasis::new("constant", vec![Expr::one()], vec![Expr::one()])
            .expect("constant basis is independent")
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "affine" => Some(AnsatzBasis::affine()),
            "loglinear" => Some(AnsatzBasis::loglinear()),
            "constant" => Some(AnsatzBasis::constant()),
            _ => None,
        }
    }

    pub fn slots(&self) -> usize {
        self.q1.len() + self.q2.len()
    }

    pub fn slot(&self, k: usize) -> (Component, &Expr) {
        if k < self.q1.len() {
            (Component::X, &self.q1[k])
        } else {
            (Component::Y, &self.q2[k - self.q1.len()])
        }
    }

    pub fn slot_label(&self, k: usize) -> String {
        let (c, b) = self.slot(k);
        format!("Q{}:{}", c.index() + 1, b)
    }

    /// `[Σ coeff(k)·b_k over Q₁ slots, Σ over Q₂ slots]`.
    pub fn combine(&self, mut coeff: impl FnMut(usize) -> Expr) -> [Expr; 2] {
        let mut parts: [Vec<Expr>; 2] = [Vec::new(), Vec::new()];
        for k in 0..self.slots() {
            let (c, b) = self.slot(k);
            let f = coeff(k);
            if f.is_zero() {
                continue;
            }
            let term = if b.is_one() {
                f
            } else if f.is_one() {
                b.clone()
            } else {
                Expr::mul(vec![f, b.clone()])
            };
            parts[c.index()].push(term);
        }
        let [a, b] = parts;
        [Expr::add(a), Expr::add(b)]
    }

    /// Worst Gram-matrix condition number of the two component bases at box samples.
    pub fn gram_condition(&self, domain: DomainBox, seed: u64) -> f64 {
        let mut sampler = Sampler::new(seed, domain);
        let pts: Vec<Binding> = (0..GRAM_POINTS)
            .map(|_| {
                Binding::new(0)
                    .with_var(VarRef::x(0), sampler.value())
                    .with_var(VarRef::y(0), sampler.value())
            })
            .collect();
        let mut worst: f64 = 1.0;
        for list in [&self.q1, &self.q2] {
            if list.is_empty() {
                continue;
            }
            let mut m = CMatrix::zeros(pts.len(), list.len());
            for (i, b) in pts.iter().enumerate() {
                for (j, e) in list.iter().enumerate() {
                    m[(i, j)] = e
                        .eval(b)
                        .unwrap_or(num_complex::Complex64::new(f64::NAN, 0.0));
                }
            }
            if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
                return f64::INFINITY;
            }
            // Columns are scaled so that the condition reflects shape, not magnitude.
            for mut col in m.column_iter_mut() {
                let norm = col.norm();
                if norm > 0.0 {
                    col /= num_complex::Complex64::new(norm, 0.0);
                }
            }
            let sv = decompose(&m).singular_values;
            let max = sv.first().copied().unwrap_or(0.0);
            let min = sv.last().copied().unwrap_or(0.0);
            let cond = if min > 0.0 {
                (max / min).powi(2)
            } else {
                f64::INFINITY
            };
            worst = worst.max(cond);
        }
        worst
    }
}

/// Parse `ansatz <name> Q1: e, e, ... Q2: e, ...`, possibly spread over several lines.
pub fn parse_ansatz_file(src: &str) -> Result<Vec<AnsatzBasis>, DetError> {
    let names = VarNames::default();
    let mut blocks: Vec<(usize, String, String)> = Vec::new();
    for (line, body) in content_lines(src) {
        let (kw, rest) = keyword(body);
        if kw == "ansatz" {
            let (name, tail) = keyword(rest);
            if name.is_empty() {
                return Err(FormatError::syntax(line, "missing ansatz name").into());
            }
            blocks.push((line, name.to_string(), tail.to_string()));
        } else if kw == "end" {
            continue;
        } else if let Some(b) = blocks.last_mut() {
            b.2.push(' ');
            b.2.push_str(body);
        } else {
            return Err(FormatError::syntax(line, "expected 'ansatz <name>'").into());
        }
    }
    let mut out = Vec::new();
    for (line, name, text) in blocks {
        let p1 = text
            .find("Q1:")
            .ok_or_else(|| FormatError::syntax(line, "missing 'Q1:'"))?;
        let p2 = text
            .find("Q2:")
            .ok_or_else(|| FormatError::syntax(line, "missing 'Q2:'"))?;
        if p2 < p1 {
            return Err(FormatError::syntax(line, "'Q1:' must precede 'Q2:'").into());
        }
        let list = |s: &str| -> Result<Vec<Expr>, FormatError> {
            split_top_level(s)
                .into_iter()
                .filter(|t| !t.is_empty())
                .map(|t| expr_at(t, &names, line))
                .collect()
        };
        let q1 = list(&text[p1 + 3..p2])?;
        let q2 = list(&text[p2 + 3..])?;
        out.push(AnsatzBasis::new(&name, q1, q2)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_are_well_conditioned() {
        for a in [
            AnsatzBasis::affine(),
            AnsatzBasis::loglinear(),
            AnsatzBasis::constant(),
        ] {
            assert!(a.gram_condition(DomainBox::default(), 1) < GRAM_CONDITION_LIMIT);
        }
    }

    #[test]
    fn dependent_basis_is_rejected() {
        let r = AnsatzBasis::new(
            "bad",
            vec![Expr::x(0), parse("2*x[n]").unwrap()],
            vec![Expr::one()],
        );
        assert!(matches!(r, Err(DetError::BadAnsatz(_))));
    }

    #[test]
    fn parses_file() {
        let src = "ansatz lin\n  Q1: x[n], y[n], 1\n  Q2: x[n], y[n], 1\n";
        let a = parse_ansatz_file(src).unwrap();
        assert_eq!(
            a[0],
            AnsatzBasis {
                name: "lin".into(),
                ..AnsatzBasis::affine()
            }
        );
    }

    #[test]
    fn combine_builds_components() {
        let a = AnsatzBasis::affine();
        let q = a.combine(|k| Expr::seq(&format!("F{}", k + 1), 0));
        assert_eq!(q[0].to_string(), "F1(n)*x[n] + F2(n)*y[n] + F3(n)");
    }
}
