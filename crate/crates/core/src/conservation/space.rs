use num_complex::Complex64;

use crate::detsolve::linalg::{null_space, pivot_basis, CMatrix};
use crate::detsolve::{
    collocate, match_closed_form, solve_constraints, unknown, AnsatzBasis, DetError,
    LinearResidual, NullSpace, SequenceTable,
};
use crate::detsolve::{clean_blocks, column_table};
use crate::expr::{Binding, Component, Expr, SampleConfig, SeqDef, SeqTable, Substitution, VarRef};
use crate::system::DiffSystem;

use super::poly::{monomial_expr, Poly};
use super::{
    assemble_integral, bind, integrability_check, integrability_conditions, integral_residual,
    verify_integral, window_points, ConservationError, FirstIntegral, GradientQuad,
    IntegrabilityReport, IntegralCheckConfig, IntegralReport,
};

pub const INTEGRABILITY_TOL: f64 = 1e-9;
/// Sample points per index used to locate the integrable subspace.
const SUBSPACE_POINTS: usize = 6;

/// One basis solution of the determining system.
#[derive(Debug, Clone)]
pub struct DeterminingElement {
    pub name: String,
    pub table: SequenceTable,
    pub closed_forms: Vec<Option<Expr>>,
    pub integrability: IntegrabilityReport,
}

/// One basis first integral of the integrable subspace.
#[derive(Debug, Clone)]
pub struct IntegralElement {
    pub name: String,
    pub table: SequenceTable,
    pub closed_forms: Vec<Option<Expr>>,
    pub quad: GradientQuad,
    pub integrability: IntegrabilityReport,
    pub integral: FirstIntegral,
    /// `φ` with every monomial coefficient replaced by its recognised closed form.
    pub closed: Option<Expr>,
    pub report: IntegralReport,
}

#[derive(Debug, Clone)]
pub struct IntegralSpace {
    pub system: String,
    pub ansatz: String,
    pub window: (i64, i64),
    pub labels: Vec<String>,
    pub null: NullSpace,
    /// Solutions of the determining system, before the integrability conditions.
    pub determining: Vec<DeterminingElement>,
    /// Solutions whose reconstructed gradient is closed.
    pub elements: Vec<IntegralElement>,
}

impl IntegralSpace {
    /// Dimension of the determining system's solution space.
    pub fn dimension(&self) -> usize {
        self.null.dimension()
    }

    /// Dimension of the subspace passing all six integrability conditions.
    pub fn integrable_dimension(&self) -> usize {
        self.elements.len()
    }
}

fn psi_names(slots: usize) -> Vec<String> {
    (1..=slots).map(|k| format!("psi{k}")).collect()
}

/// `(P₂, Q₂)` built from a coefficient table, or from closed forms when all are known.
fn second_components(
    ansatz: &AnsatzBasis,
    table: &SequenceTable,
    closed: Option<&[Option<Expr>]>,
) -> ([Expr; 2], SeqTable) {
    let names = &table.names;
    match closed {
        Some(forms) if forms.iter().all(Option::is_some) => {
            let mut seqs = SeqTable::new();
            for (k, f) in forms.iter().enumerate() {
                seqs.insert(&names[k], SeqDef::Expr(f.clone().unwrap()));
            }
            let q = ansatz.combine(|k| {
                if forms[k].as_ref().is_some_and(Expr::is_zero) {
                    Expr::zero()
                } else {
                    Expr::seq(&names[k], 0)
                }
            });
            (q, seqs)
        }
        _ => {
            let q = ansatz.combine(|k| {
                if table.is_zero_column(k) {
                    Expr::zero()
                } else {
                    Expr::seq(&names[k], 0)
                }
            });
            (q, table.to_seq_table())
        }
    }
}

/// Paper-style grouping of a coefficient slot: a `P₂` slot with basis `b` and a `Q₂` slot
/// whose basis is `b` with `x ↔ y` share a group, numbered by `b`'s position.
fn slot_group(ansatz: &AnsatzBasis, k: usize) -> usize {
    let (c, b) = ansatz.slot(k);
    match c {
        Component::X => k,
        Component::Y => {
            let swap: Substitution = [
                (VarRef::x(0), Expr::y(0)),
                (VarRef::y(0), Expr::x(0)),
            ]
            .into_iter()
            .collect();
            let mirrored = b.substitute(&swap).simplify();
            ansatz
                .q1
                .iter()
                .position(|e| e.simplify() == mirrored)
                .unwrap_or(k)
        }
    }
}

/// Order basis columns by slot group, then by pivot position.
fn grouped_order(ansatz: &AnsatzBasis, pivots: &[usize], slots: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pivots.len()).collect();
    idx.sort_by_key(|&j| (slot_group(ansatz, pivots[j] % slots), pivots[j]));
    idx
}

/// Values of the six integrability conditions at fixed points, for one coefficient table.
fn condition_values(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    table: &SequenceTable,
    points: &[(i64, [f64; 4])],
) -> Result<Vec<Complex64>, ConservationError> {
    let ([p2, q2], seqs) = second_components(ansatz, table, None);
    let g = GradientQuad::from_second(sys, "probe", p2, q2, &seqs);
    let conds = integrability_conditions(&g);
    let mut out = Vec::with_capacity(points.len() * conds.len());
    for (n, z) in points {
        let b = bind(&g.seqs, *n, z);
        for (_, e) in &conds {
            out.push(e.eval(&b)?);
        }
    }
    Ok(out)
}

/// Collocate the determining system, solve it, and assemble and verify the first integrals
/// of its integrable subspace.
pub fn solve_integral_space(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    cfg: &SampleConfig,
    check: &IntegralCheckConfig,
) -> Result<IntegralSpace, ConservationError> {
    let [p2, q2] = ansatz.combine(unknown);
    let residual = integral_residual(sys, &p2, &q2)?;
    let lin = LinearResidual::from_residuals(residual.to_vec(), ansatz.slots())?;
    let labels: Vec<String> = (0..ansatz.slots())
        .map(|k| {
            let (c, b) = ansatz.slot(k);
            let head = if c == Component::X { "P2" } else { "Q2" };
            format!("{head}:{b}")
        })
        .collect();
    let constraints = collocate(sys, &lin, labels.clone(), cfg)?;
    let null = solve_constraints(&constraints)?;
    let slots = ansatz.slots();
    let names = psi_names(slots);
    let icfg = SampleConfig {
        tol: INTEGRABILITY_TOL,
        ..cfg.clone()
    };

    let mut determining = Vec::with_capacity(null.dimension());
    for (i, j) in grouped_order(ansatz, &null.pivots, slots).into_iter().enumerate() {
        let col = null.pivot.columns(j, 1).into_owned();
        let table = column_table(&null, &col, &names);
        let closed_forms = closed_forms(&table);
        let ([p2, q2], seqs) = second_components(ansatz, &table, Some(&closed_forms));
        let name = format!("D{}", i + 1);
        let quad = GradientQuad::from_second(sys, &name, p2, q2, &seqs);
        let integrability = integrability_check(&quad, &icfg)?;
        determining.push(DeterminingElement {
            name,
            table,
            closed_forms,
            integrability,
        });
    }

    // Integrability is linear in the coefficients, so the integrable solutions form the null
    // space of the condition values over the orthonormal basis.
    let points = window_points(cfg, SUBSPACE_POINTS * (cfg.window.1 - cfg.window.0 + 1) as usize);
    let d = null.dimension();
    let mut columns = Vec::with_capacity(d);
    for j in 0..d {
        let col = null.orthonormal.columns(j, 1).into_owned();
        let table = column_table(&null, &col, &names);
        columns.push(condition_values(sys, ansatz, &table, &points)?);
    }
    let rows = columns.first().map_or(0, Vec::len);
    let m = CMatrix::from_fn(rows, d, |r, c| columns[c][r]);
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let combos = if scale < INTEGRABILITY_TOL {
        CMatrix::identity(d, d)
    } else {
        null_space(&(m / Complex64::new(scale, 0.0)))
    };
    let subspace = &null.orthonormal * combos;
    let (mut basis, pivots) = pivot_basis(&subspace);
    if pivots.len() != subspace.ncols() {
        return Err(DetError::InvalidConfig("integrable basis is numerically degenerate".into()).into());
    }
    clean_blocks(&mut basis, slots);

    let mut elements = Vec::with_capacity(basis.ncols());
    for (i, j) in grouped_order(ansatz, &pivots, slots).into_iter().enumerate() {
        let col = basis.columns(j, 1).into_owned();
        let table = column_table(&null, &col, &names);
        let closed_forms = closed_forms(&table);
        let ([p2, q2], seqs) = second_components(ansatz, &table, Some(&closed_forms));
        let name = format!("phi{}", i + 1);
        let quad = GradientQuad::from_second(sys, &name, p2, q2, &seqs);
        let integrability = integrability_check(&quad, &icfg)?;
        let integral = assemble_integral(sys, &quad, &icfg)?;
        let tabulated = closed_forms.iter().any(Option::is_none) || integral.index_term;
        // Tabulated coefficients end with the window; orbits must stay inside it.
        let steps = if tabulated {
            check
                .steps
                .min((table.end() - 1 - check.sample.window.0).max(1) as usize)
        } else {
            check.steps
        };
        let report = verify_integral(
            sys,
            &integral,
            &IntegralCheckConfig {
                steps,
                ..check.clone()
            },
        )?;
        let closed = closed_form_integral(&integral, cfg.window)?;
        elements.push(IntegralElement {
            name,
            table,
            closed_forms,
            quad,
            integrability,
            integral,
            closed,
            report,
        });
    }
    Ok(IntegralSpace {
        system: sys.name().to_string(),
        ansatz: ansatz.name.clone(),
        window: cfg.window,
        labels,
        null,
        determining,
        elements,
    })
}

/// Rewrite `φ` with closed-form monomial coefficients, recognised from their values over
/// `window`; `None` when some coefficient has no recognised form.
pub fn closed_form_integral(
    f: &FirstIntegral,
    window: (i64, i64),
) -> Result<Option<Expr>, ConservationError> {
    let mut terms = Vec::new();
    for (m, c) in Poly::from_expr(&f.phi)?.coefficients() {
        let values = (window.0..=window.1)
            .map(|n| c.eval(&Binding::new(n).with_seqs(&f.seqs)))
            .collect::<Result<Vec<_>, _>>()?;
        let Some(form) = match_closed_form(&values, window.0) else {
            return Ok(None);
        };
        if form.is_zero() {
            continue;
        }
        let mono = monomial_expr(&m);
        terms.push(if mono.is_one() {
            form
        } else if form.is_one() {
            mono
        } else {
            Expr::mul(vec![form, mono])
        });
    }
    Ok(Some(Expr::add(terms)))
}

fn closed_forms(table: &SequenceTable) -> Vec<Option<Expr>> {
    (0..table.names.len())
        .map(|k| match_closed_form(&table.column(k), table.start))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn swap() -> DiffSystem {
        DiffSystem::new("swap", [Expr::y(0), Expr::x(0)]).unwrap()
    }

    fn solve(ansatz: &AnsatzBasis, window: (i64, i64)) -> IntegralSpace {
        let cfg = SampleConfig {
            window,
            ..SampleConfig::default()
        };
        solve_integral_space(&swap(), ansatz, &cfg, &IntegralCheckConfig::default()).unwrap()
    }

    #[test]
    fn swap_affine_space() {
        let s = solve(&AnsatzBasis::affine(), (0, 24));
        assert_eq!(s.dimension(), 12);
        assert_eq!(s.integrable_dimension(), 8);
        assert_eq!(s.determining.iter().filter(|d| d.integrability.passed).count(), 4);
        for e in &s.elements {
            assert!(e.integrability.passed, "{}", e.name);
            assert!(e.report.passed, "{}: {:?}", e.name, e.report);
            assert!(!e.integral.index_term);
            assert!(e.closed_forms.iter().all(Option::is_some));
        }
    }

    #[test]
    fn longer_window_keeps_the_dimensions() {
        let s = solve(&AnsatzBasis::affine(), (0, 48));
        assert_eq!((s.dimension(), s.integrable_dimension()), (12, 8));
    }

    #[test]
    fn constant_ansatz_space() {
        let s = solve(&AnsatzBasis::constant(), (0, 24));
        assert_eq!((s.dimension(), s.integrable_dimension()), (4, 4));
        assert!(s.elements.iter().all(|e| e.report.passed));
    }
}
