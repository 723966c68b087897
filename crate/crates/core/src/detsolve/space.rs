use crate::expr::{Binding, Component, Expr, SampleConfig, Sampler, VarRef};
use crate::slsc::{check_generator, check_generator_scaled, CharacteristicPair, CheckReport};
use crate::system::DiffSystem;

use super::ansatz::AnsatzBasis;
use super::closed_form::match_closed_form;
use super::collocation::{build_collocation, RecurrenceConstraints, SHIFTS};
use super::linalg::{
    decompose, least_squares, null_space, pivot_basis, projection_residual, rank_of, CMatrix,
    CVector, REL_RANK_TOL,
};
use super::recurrence::SequenceTable;
use super::DetError;

/// Every basis element must satisfy the symmetry condition to this tolerance.
pub const VERIFY_TOL: f64 = 1e-8;
/// Ranks and nullities must agree over this many trailing indices.
const STABLE_TAIL: usize = 4;

/// Solutions of the stacked constraints over `F(n0), …, F(n1+2)`.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub start: i64,
    pub slots: usize,
    /// Orthonormal columns.
    pub orthonormal: CMatrix,
    /// Columns equal to the identity on `pivots`.
    pub pivot: CMatrix,
    pub pivots: Vec<usize>,
    pub ranks: Vec<(i64, usize)>,
    /// Nullity of the constraints up to each trailing index.
    pub nullities: Vec<(i64, usize)>,
}

impl NullSpace {
    pub fn dimension(&self) -> usize {
        self.orthonormal.ncols()
    }

    /// Number of tabulated indices.
    pub fn len(&self) -> usize {
        self.orthonormal.nrows() / self.slots.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// `(n, slot)` of a stacked coordinate.
    pub fn coordinate(&self, row: usize) -> (i64, usize) {
        (self.start + (row / self.slots) as i64, row % self.slots)
    }
}

/// Stack `C(n0..=n0+count-1)` into one matrix over `F(n0..n0+count+1)`.
fn stacked(c: &RecurrenceConstraints, count: usize) -> CMatrix {
    let slots = c.slots;
    let blocks = &c.blocks[..count];
    let rows: usize = blocks.iter().map(|b| b.matrix.nrows()).sum();
    let mut m = CMatrix::zeros(rows, (count + SHIFTS - 1) * slots);
    let mut r0 = 0;
    for (t, b) in blocks.iter().enumerate() {
        m.view_mut((r0, t * slots), (b.matrix.nrows(), SHIFTS * slots))
            .copy_from(&b.matrix);
        r0 += b.matrix.nrows();
    }
    m
}

fn nullity(m: &CMatrix) -> usize {
    if m.nrows() == 0 {
        return m.ncols();
    }
    m.ncols() - rank_of(&decompose(m).singular_values, REL_RANK_TOL)
}

/// Global null space of the stacked constraints, after checking that ranks and the
/// nullities of the trailing prefixes have stabilised.
pub fn solve_constraints(c: &RecurrenceConstraints) -> Result<NullSpace, DetError> {
    let count = c.blocks.len();
    if count < STABLE_TAIL {
        return Err(DetError::InvalidConfig("window too short".into()));
    }
    let ranks = c.ranks();
    let nullities: Vec<(i64, usize)> = (count + 1 - STABLE_TAIL..=count)
        .map(|k| (c.blocks[k - 1].n, nullity(&stacked(c, k))))
        .collect();
    let tail = &ranks[count - STABLE_TAIL..];
    let stable =
        tail.iter().all(|r| r.1 == tail[0].1) && nullities.iter().all(|r| r.1 == nullities[0].1);
    if !stable {
        return Err(DetError::RankUnstable { ranks, nullities });
    }
    let orthonormal = null_space(&stacked(c, count));
    let (mut pivot, pivots) = pivot_basis(&orthonormal);
    if pivots.len() != orthonormal.ncols() {
        return Err(DetError::InvalidConfig(
            "solution basis is numerically degenerate".into(),
        ));
    }
    clean_blocks(&mut pivot, c.slots);
    Ok(NullSpace {
        start: c.window.0,
        slots: c.slots,
        orthonormal,
        pivot,
        pivots,
        ranks,
        nullities,
    })
}

/// Zero entries that are negligible within their own index block.
pub(crate) fn clean_blocks(m: &mut CMatrix, slots: usize) {
    for mut col in m.column_iter_mut() {
        for block in col.as_mut_slice().chunks_mut(slots) {
            let scale = block.iter().map(|z| z.norm()).fold(0.0, f64::max);
            for z in block.iter_mut() {
                if z.re.abs() < 1e-12 * scale {
                    z.re = 0.0;
                }
                if z.im.abs() < 1e-12 * scale {
                    z.im = 0.0;
                }
            }
        }
    }
}

/// One basis generator with its coefficient table.
#[derive(Debug, Clone)]
pub struct SpaceElement {
    pub name: String,
    pub table: SequenceTable,
    pub closed_forms: Vec<Option<Expr>>,
    /// Characteristic with tabulated coefficients `F1(n), F2(n), …`.
    pub pair: CharacteristicPair,
    /// Characteristic with closed-form coefficients when every one was recognised.
    pub closed: Option<[Expr; 2]>,
    pub report: CheckReport,
}

#[derive(Debug, Clone)]
pub struct SymmetrySpace {
    pub system: String,
    pub ansatz: String,
    pub window: (i64, i64),
    pub labels: Vec<String>,
    pub null: NullSpace,
    pub elements: Vec<SpaceElement>,
}

impl SymmetrySpace {
    pub fn dimension(&self) -> usize {
        self.null.dimension()
    }
}

pub(crate) fn coefficient_names(slots: usize) -> Vec<String> {
    (1..=slots).map(|k| format!("F{k}")).collect()
}

/// Reshape a stacked column into a table over the window.
pub(crate) fn column_table(null: &NullSpace, col: &CMatrix, names: &[String]) -> SequenceTable {
    let slots = null.slots;
    let values = (0..null.len())
        .map(|t| (0..slots).map(|k| col[(t * slots + k, 0)]).collect())
        .collect();
    SequenceTable {
        start: null.start,
        names: names.to_vec(),
        values,
    }
}

fn verify_config(cfg: &SampleConfig) -> SampleConfig {
    SampleConfig {
        samples: None,
        tol: VERIFY_TOL,
        ..cfg.clone()
    }
}

/// Build and verify the generators spanned by the null space.
pub fn solve_space(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    constraints: &RecurrenceConstraints,
    cfg: &SampleConfig,
) -> Result<SymmetrySpace, DetError> {
    let null = solve_constraints(constraints)?;
    let names = coefficient_names(ansatz.slots());
    let vcfg = verify_config(cfg);
    let mut elements = Vec::with_capacity(null.dimension());
    for j in 0..null.dimension() {
        let col = null.pivot.columns(j, 1).into_owned();
        let table = column_table(&null, &col, &names);
        let name = format!("S{}", j + 1);
        let q = ansatz.combine(|k| {
            if table.is_zero_column(k) {
                Expr::zero()
            } else {
                Expr::seq(&names[k], 0)
            }
        });
        let pair =
            CharacteristicPair::named(&name, q[0].clone(), q[1].clone(), table.to_seq_table())?;
        let closed_forms: Vec<Option<Expr>> = (0..names.len())
            .map(|k| match_closed_form(&table.column(k), table.start))
            .collect();
        let closed = closed_forms
            .iter()
            .all(Option::is_some)
            .then(|| ansatz.combine(|k| closed_forms[k].clone().unwrap_or_else(Expr::zero)));
        // Exact coefficients avoid the rounding carried by growing tabulated sequences.
        let report = match &closed {
            Some(q) => {
                let exact = CharacteristicPair::named(
                    &name,
                    q[0].clone(),
                    q[1].clone(),
                    Default::default(),
                )?;
                check_generator(sys, &exact, &vcfg)?
            }
            None => {
                // Tabulated coefficients carry relative rounding, so the residual is measured
                // against the local coefficient size.
                let tab = &table;
                let size = |n: i64| {
                    (n..=n + 2)
                        .flat_map(|m| (0..tab.names.len()).filter_map(move |k| tab.get(m, k)))
                        .map(|z| z.norm())
                        .fold(1.0, f64::max)
                };
                check_generator_scaled(sys, &pair, &vcfg, &size)?
            }
        };
        if !report.passed {
            return Err(DetError::Verification {
                name,
                residual: report.max_residual,
            });
        }
        elements.push(SpaceElement {
            name,
            table,
            closed_forms,
            pair,
            closed,
            report,
        });
    }
    Ok(SymmetrySpace {
        system: sys.name().to_string(),
        ansatz: ansatz.name.clone(),
        window: constraints.window,
        labels: constraints.labels.clone(),
        null,
        elements,
    })
}

/// Collocate, solve and verify in one step.
pub fn symmetries(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    cfg: &SampleConfig,
) -> Result<SymmetrySpace, DetError> {
    let constraints = build_collocation(sys, ansatz, cfg)?;
    solve_space(sys, ansatz, &constraints, cfg)
}

/// Distance of a characteristic from the computed space.
///
/// The pair is fitted onto the ansatz at each tabulated index; the result is the larger of
/// the worst fit residual and the relative residual of projecting the fitted coefficients.
pub fn membership_residual(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    space: &SymmetrySpace,
    pair: &CharacteristicPair,
    cfg: &SampleConfig,
) -> Result<f64, DetError> {
    let null = &space.null;
    let seqs = sys.seqs().merged(&pair.seqs);
    let mut sampler = Sampler::from_config(cfg);
    let points = 3 * ansatz.slots().max(4);
    let mut stacked = CVector::zeros(null.len() * null.slots);
    let mut fit_residual: f64 = 0.0;
    for t in 0..null.len() {
        let n = null.start + t as i64;
        let bindings: Vec<Binding> = (0..points)
            .map(|_| {
                Binding::new(n)
                    .with_seqs(&seqs)
                    .with_var(VarRef::x(0), sampler.value())
                    .with_var(VarRef::y(0), sampler.value())
            })
            .collect();
        let mut offset = 0;
        for (c, basis) in [(Component::X, &ansatz.q1), (Component::Y, &ansatz.q2)] {
            if basis.is_empty() {
                continue;
            }
            let mut a = CMatrix::zeros(points, basis.len());
            let mut rhs = CVector::zeros(points);
            for (i, b) in bindings.iter().enumerate() {
                for (j, e) in basis.iter().enumerate() {
                    a[(i, j)] = e.eval(b)?;
                }
                rhs[i] = pair.component(c).eval(b)?;
            }
            let coef = least_squares(&a, &rhs);
            let scale = rhs.norm().max(1e-300);
            fit_residual = fit_residual.max((&a * &coef - &rhs).norm() / scale);
            for (j, z) in coef.iter().enumerate() {
                stacked[t * null.slots + offset + j] = *z;
            }
            offset += basis.len();
        }
    }
    let proj = projection_residual(&null.orthonormal, &stacked);
    Ok(fit_residual.max(proj))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn swap() -> DiffSystem {
        DiffSystem::new("swap", [Expr::y(0), Expr::x(0)]).unwrap()
    }

    #[test]
    fn swap_constant_ansatz_has_four_periodic_generators() {
        let s = symmetries(&swap(), &AnsatzBasis::constant(), &SampleConfig::default()).unwrap();
        assert_eq!(s.dimension(), 4);
        for e in &s.elements {
            assert!(e.closed.is_some(), "{}", e.name);
        }
        let first = s.elements[0].closed_forms[0].as_ref().unwrap();
        assert_eq!(first.to_string(), "(1 + (-1)^n + i^n + (-i)^n)/4");
    }

    #[test]
    fn scaling_pair_is_a_member() {
        let sys = swap();
        let a = AnsatzBasis::affine();
        let s = symmetries(&sys, &a, &SampleConfig::default()).unwrap();
        let scaling = CharacteristicPair::new(Expr::x(0), Expr::y(0)).unwrap();
        let r = membership_residual(&sys, &a, &s, &scaling, &SampleConfig::default()).unwrap();
        assert!(r < 1e-8, "{r}");
        let bogus = CharacteristicPair::new(parse("x[n]^2").unwrap(), Expr::zero()).unwrap();
        let r = membership_residual(&sys, &a, &s, &bogus, &SampleConfig::default()).unwrap();
        assert!(r > 1e-3);
    }
}
