use num_complex::Complex64;
use rand::Rng;

use crate::expr::{EvalError, Expr, SampleConfig, Sampler, SeqDef};
use crate::slsc::symmetry_residual;
use crate::system::DiffSystem;

use super::ansatz::AnsatzBasis;
use super::linalg::{normalize_rows, row_space, CMatrix};
use super::DetError;

const UNKNOWN_PREFIX: &str = "__F";
/// Shifts `F(n)`, `F(n+1)`, `F(n+2)` appearing in a second-order residual.
pub const SHIFTS: usize = 3;
pub const MIN_WINDOW: i64 = 6;

/// Placeholder sequence for the `k`-th unknown coefficient.
pub fn unknown(k: usize) -> Expr {
    Expr::seq(&unknown_name(k), 0)
}

fn unknown_name(k: usize) -> String {
    format!("{UNKNOWN_PREFIX}{k}")
}

/// Residual equations that are linear in unknown sequences `F_k(n+s)`, `s = 0, 1, 2`.
#[derive(Debug, Clone)]
pub struct LinearResidual {
    pub slots: usize,
    pub equations: Vec<Expr>,
    /// `coeffs[eq][s][k]` multiplies `F_k(n+s)`.
    pub coeffs: Vec<[Vec<Expr>; SHIFTS]>,
}

impl LinearResidual {
    /// Extract the coefficient of each unknown by differentiation.
    pub fn from_residuals(equations: Vec<Expr>, slots: usize) -> Result<Self, DetError> {
        let mut coeffs = Vec::with_capacity(equations.len());
        for eq in &equations {
            check_unknown_offsets(eq)?;
            let mut per_shift: [Vec<Expr>; SHIFTS] = Default::default();
            for (s, row) in per_shift.iter_mut().enumerate() {
                for k in 0..slots {
                    let c = eq.diff_seq(&unknown_name(k), s as i64);
                    if c.seq_names().iter().any(|m| m.starts_with(UNKNOWN_PREFIX)) {
                        return Err(DetError::NotLinear(eq.to_string()));
                    }
                    row.push(c);
                }
            }
            coeffs.push(per_shift);
        }
        Ok(LinearResidual {
            slots,
            equations,
            coeffs,
        })
    }

    pub fn width(&self) -> usize {
        SHIFTS * self.slots
    }

    /// Row of coefficients for one equation at one sample, laid out as `[F(n); F(n+1); F(n+2)]`.
    pub fn row(&self, eq: usize, b: &crate::expr::Binding) -> Result<Vec<Complex64>, EvalError> {
        let mut out = Vec::with_capacity(self.width());
        for s in 0..SHIFTS {
            for c in &self.coeffs[eq][s] {
                out.push(if c.is_zero() {
                    Complex64::new(0.0, 0.0)
                } else {
                    c.eval(b)?
                });
            }
        }
        Ok(out)
    }
}

fn check_unknown_offsets(e: &Expr) -> Result<(), DetError> {
    let mut bad = None;
    fn walk(e: &Expr, bad: &mut Option<String>) {
        if let crate::expr::Node::Seq { name, offset } = e.node() {
            if name.starts_with(UNKNOWN_PREFIX) && !(0..SHIFTS as i64).contains(offset) {
                *bad = Some(e.to_string());
            }
        }
        for c in e.children() {
            walk(c, bad);
        }
    }
    walk(e, &mut bad);
    match bad {
        Some(s) => Err(DetError::NotLinear(format!(
            "unknown coefficient shifted out of range: {s}"
        ))),
        None => Ok(()),
    }
}

/// Row-reduced constraints `C(n)` at one index.
#[derive(Debug, Clone)]
pub struct ConstraintBlock {
    pub n: i64,
    /// Orthonormal rows acting on `[F(n); F(n+1); F(n+2)]`.
    pub matrix: CMatrix,
    pub rank: usize,
}

#[derive(Debug, Clone)]
pub struct RecurrenceConstraints {
    pub window: (i64, i64),
    pub slots: usize,
    pub labels: Vec<String>,
    pub blocks: Vec<ConstraintBlock>,
}

impl RecurrenceConstraints {
    pub fn ranks(&self) -> Vec<(i64, usize)> {
        self.blocks.iter().map(|b| (b.n, b.rank)).collect()
    }
}

pub fn default_samples(slots: usize) -> usize {
    10 * SHIFTS * slots
}

/// Evaluate a linear residual at random points for every index in the window.
pub fn collocate(
    sys: &DiffSystem,
    lin: &LinearResidual,
    labels: Vec<String>,
    cfg: &SampleConfig,
) -> Result<RecurrenceConstraints, DetError> {
    let (n0, n1) = cfg.window;
    if n1 - n0 + 1 < MIN_WINDOW {
        return Err(DetError::InvalidConfig(format!(
            "window must cover at least {MIN_WINDOW} indices"
        )));
    }
    let samples = cfg.samples.unwrap_or_else(|| default_samples(lin.slots));
    if samples < SHIFTS * lin.slots {
        return Err(DetError::InvalidConfig(format!(
            "at least {} samples per index are needed",
            SHIFTS * lin.slots
        )));
    }
    let mut sampler = Sampler::from_config(cfg);
    let mut blocks = Vec::with_capacity((n1 - n0 + 1) as usize);
    let mut checked_linearity = false;
    for n in n0..=n1 {
        let mut rows = Vec::with_capacity(samples * lin.equations.len());
        let mut got = 0;
        let mut attempts = 0;
        while got < samples && attempts < 10 * samples {
            attempts += 1;
            let b = sys.random_point(n, &mut sampler);
            let mut point_rows = Vec::with_capacity(lin.equations.len());
            let mut ok = true;
            for eq in 0..lin.equations.len() {
                match lin.row(eq, &b) {
                    Ok(r) if r.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => {
                        point_rows.push(r)
                    }
                    Ok(_) => {
                        ok = false;
                        break;
                    }
                    Err(e) if e.is_domain() => {
                        ok = false;
                        break;
                    }
                    Err(e) => return Err(e.into()),
                }
            }
            if !ok {
                continue;
            }
            if !checked_linearity {
                verify_linearity(sys, lin, &b, &point_rows, &mut sampler)?;
                checked_linearity = true;
            }
            rows.extend(point_rows);
            got += 1;
        }
        if got == 0 {
            return Err(DetError::Sampling { n });
        }
        let m = normalize_rows(rows, lin.width());
        let c = row_space(&m);
        let r = c.nrows();
        blocks.push(ConstraintBlock {
            n,
            matrix: c,
            rank: r,
        });
    }
    Ok(RecurrenceConstraints {
        window: cfg.window,
        slots: lin.slots,
        labels,
        blocks,
    })
}

/// The residual evaluated with random unknowns must equal the assembled row product.
fn verify_linearity(
    sys: &DiffSystem,
    lin: &LinearResidual,
    b: &crate::expr::Binding,
    rows: &[Vec<Complex64>],
    sampler: &mut Sampler,
) -> Result<(), DetError> {
    let mut table = sys.seqs().clone();
    let mut f = Vec::with_capacity(lin.width());
    for k in 0..lin.slots {
        let vals: Vec<Complex64> = (0..SHIFTS)
            .map(|_| Complex64::new(sampler.rng().random_range(-1.0..1.0), 0.0))
            .collect();
        table.insert(
            &unknown_name(k),
            SeqDef::Table {
                start: b.n,
                values: vals,
            },
        );
    }
    for s in 0..SHIFTS {
        for k in 0..lin.slots {
            if let Some(SeqDef::Table { values, .. }) = table.get(&unknown_name(k)) {
                f.push(values[s]);
            }
        }
    }
    let bind = b.clone().with_seqs(&table);
    for (eq, row) in lin.equations.iter().zip(rows) {
        let direct = eq.eval(&bind)?;
        let assembled: Complex64 = row.iter().zip(&f).map(|(a, x)| a * x).sum();
        if (direct - assembled).norm() > 1e-8 * (1.0 + direct.norm()) {
            return Err(DetError::NotLinear(eq.to_string()));
        }
    }
    Ok(())
}

/// Collocation of the symmetry condition with the ansatz `Qᵢ = Σ F_k(n)·b_k`.
pub fn build_collocation(
    sys: &DiffSystem,
    ansatz: &AnsatzBasis,
    cfg: &SampleConfig,
) -> Result<RecurrenceConstraints, DetError> {
    if sys.order() != 2 {
        return Err(DetError::InvalidConfig(
            "the solver handles second-order systems".into(),
        ));
    }
    let q = ansatz.combine(unknown);
    let residual = symmetry_residual(sys, &q);
    let lin = LinearResidual::from_residuals(residual.to_vec(), ansatz.slots())?;
    let labels = (0..ansatz.slots()).map(|k| ansatz.slot_label(k)).collect();
    collocate(sys, &lin, labels, cfg)
}
