use num_complex::Complex64;
use serde::Serialize;

use crate::expr::{Binding, Expr, SeqDef, SeqTable};

use super::linalg::{decompose, pseudo_inverse, rank_of, CMatrix, CVector, REL_RANK_TOL};
use super::DetError;

/// Values of several named sequences over consecutive indices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceTable {
    pub start: i64,
    pub names: Vec<String>,
    /// `values[t][k]` is sequence `k` at index `start + t`.
    pub values: Vec<Vec<Complex64>>,
}

impl SequenceTable {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn end(&self) -> i64 {
        self.start + self.values.len() as i64 - 1
    }

    pub fn column(&self, k: usize) -> Vec<Complex64> {
        self.values.iter().map(|row| row[k]).collect()
    }

    pub fn get(&self, n: i64, k: usize) -> Option<Complex64> {
        let t = usize::try_from(n - self.start).ok()?;
        self.values.get(t).map(|row| row[k])
    }

    /// Column is numerically zero relative to the table's largest entry.
    pub fn is_zero_column(&self, k: usize) -> bool {
        let scale = self
            .values
            .iter()
            .flat_map(|r| r.iter().map(|z| z.norm()))
            .fold(0.0, f64::max)
            .max(1e-300);
        self.values.iter().all(|r| r[k].norm() <= 1e-12 * scale)
    }

    /// Every column as a tabulated named sequence.
    pub fn to_seq_table(&self) -> SeqTable {
        let mut t = SeqTable::new();
        for (k, name) in self.names.iter().enumerate() {
            t.insert(
                name,
                SeqDef::Table {
                    start: self.start,
                    values: self.column(k),
                },
            );
        }
        t
    }
}

/// Coefficients `(A₀, A₁, A₂)` of `A₀F(n) + A₁F(n+1) + A₂F(n+2) = 0` at index `n`.
pub type RecurrenceRelation<'a> = dyn Fn(i64) -> Result<[CMatrix; 3], DetError> + 'a;

/// Forward propagation from `F(n0)`, `F(n0+1)` over `window`.
pub fn solve_recurrence(
    names: &[&str],
    relation: &RecurrenceRelation,
    inits: [CVector; 2],
    window: (i64, i64),
) -> Result<SequenceTable, DetError> {
    let dim = names.len();
    if inits[0].len() != dim || inits[1].len() != dim {
        return Err(DetError::InvalidConfig(
            "initial vectors must match the number of sequences".into(),
        ));
    }
    let (n0, n1) = window;
    let mut values: Vec<CVector> = vec![inits[0].clone(), inits[1].clone()];
    let mut n = n0;
    while (values.len() as i64) < n1 - n0 + 1 {
        let [a0, a1, a2] = relation(n)?;
        let sv = decompose(&a2).singular_values;
        if a2.ncols() != dim || rank_of(&sv, REL_RANK_TOL) < dim {
            return Err(DetError::SingularLeading { n });
        }
        let k = values.len();
        let rhs = -(&a0 * &values[k - 2] + &a1 * &values[k - 1]);
        let next = pseudo_inverse(&a2) * rhs;
        values.push(next);
        n += 1;
    }
    values.truncate((n1 - n0 + 1).max(0) as usize);
    Ok(SequenceTable {
        start: n0,
        names: names.iter().map(|s| s.to_string()).collect(),
        values: values
            .into_iter()
            .map(|v| v.iter().copied().collect())
            .collect(),
    })
}

/// Build a relation from equations linear in `name(n)`, `name(n+1)`, `name(n+2)`.
///
/// Coefficients may depend on `n` and on the sequences in `known`.
pub fn relation_from_exprs<'a>(
    names: &'a [&'a str],
    equations: &'a [Expr],
    known: &'a SeqTable,
) -> impl Fn(i64) -> Result<[CMatrix; 3], DetError> + 'a {
    move |n| {
        let b = Binding::new(n).with_seqs(known);
        let mut mats = [
            CMatrix::zeros(equations.len(), names.len()),
            CMatrix::zeros(equations.len(), names.len()),
            CMatrix::zeros(equations.len(), names.len()),
        ];
        for (i, eq) in equations.iter().enumerate() {
            for (s, m) in mats.iter_mut().enumerate() {
                for (k, name) in names.iter().enumerate() {
                    let c = eq.diff_seq(name, s as i64);
                    if !c.is_zero() {
                        m[(i, k)] = c.eval(&b)?;
                    }
                }
            }
        }
        Ok(mats)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn c(v: f64) -> Complex64 {
        Complex64::new(v, 0.0)
    }

    #[test]
    fn swap_type_recurrence_is_four_periodic() {
        let names = ["F1", "F2"];
        let eqs = [
            parse("F1(n+2) - F2(n)").unwrap(),
            parse("F2(n+2) - F1(n)").unwrap(),
        ];
        let known = SeqTable::new();
        let rel = relation_from_exprs(&names, &eqs, &known);
        let t = solve_recurrence(
            &names,
            &rel,
            [
                CVector::from_vec(vec![c(1.0), c(0.0)]),
                CVector::from_vec(vec![c(0.0), c(0.0)]),
            ],
            (0, 11),
        )
        .unwrap();
        let f1: Vec<f64> = t.column(0).iter().map(|z| z.re).collect();
        assert_eq!(f1, vec![1., 0., 0., 0., 1., 0., 0., 0., 1., 0., 0., 0.]);
    }

    #[test]
    fn constant_sequence() {
        let names = ["F"];
        let eqs = [parse("F(n+2) - F(n+1)").unwrap()];
        let known = SeqTable::new();
        let rel = relation_from_exprs(&names, &eqs, &known);
        let t = solve_recurrence(
            &names,
            &rel,
            [
                CVector::from_vec(vec![c(3.0)]),
                CVector::from_vec(vec![c(3.0)]),
            ],
            (0, 9),
        )
        .unwrap();
        assert!(t.column(0).iter().all(|z| *z == c(3.0)));
    }

    #[test]
    fn singular_leading_block() {
        let names = ["F"];
        let eqs = [parse("F(n+1) - F(n)").unwrap()];
        let known = SeqTable::new();
        let rel = relation_from_exprs(&names, &eqs, &known);
        let r = solve_recurrence(
            &names,
            &rel,
            [
                CVector::from_vec(vec![c(1.0)]),
                CVector::from_vec(vec![c(1.0)]),
            ],
            (0, 5),
        );
        assert!(matches!(r, Err(DetError::SingularLeading { n: 0 })));
    }
}
