use crate::expr::{Binding, Expr, EPS_DOM};

use super::ReductionError;

pub const QUAD_ATOL: f64 = 1e-10;
const MAX_DEPTH: u32 = 40;

// 15-point Kronrod extension of the 7-point Gauss rule on [-1, 1].
const XK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd-indexed Kronrod nodes 1, 3, 5, 7.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// `s(x) = ∫_{x0}^{x} dt / q(t)` for a characteristic component `q` in one variable.
#[derive(Debug, Clone)]
pub struct CanonicalCoordinate {
    q: Expr,
    var: Option<Variable>,
    x0: f64,
}

#[derive(Debug, Clone)]
enum Variable {
    State(crate::expr::VarRef),
    Symbol(String),
}

impl CanonicalCoordinate {
    /// `q` may mention at most one state variable or free symbol, and not `n`.
    pub fn new(q: Expr, x0: f64) -> Result<Self, ReductionError> {
        let vars = q.vars();
        let syms = q.syms();
        if vars.len() + syms.len() > 1 || q.depends_on_index() || !q.seq_names().is_empty() {
            return Err(ReductionError::Invalid(format!(
                "canonical coordinates need a function of one variable, got {q}"
            )));
        }
        let var = match (vars.into_iter().next(), syms.into_iter().next()) {
            (Some(v), _) => Some(Variable::State(v)),
            (_, Some(s)) => Some(Variable::Symbol(s)),
            _ => None,
        };
        Ok(CanonicalCoordinate { q, var, x0 })
    }

    pub fn q(&self) -> &Expr {
        &self.q
    }

    /// Integration variable, if `q` mentions one.
    pub fn variable(&self) -> Option<String> {
        match &self.var {
            Some(Variable::State(v)) => Some(v.to_string()),
            Some(Variable::Symbol(s)) => Some(s.clone()),
            None => None,
        }
    }

    pub fn origin(&self) -> f64 {
        self.x0
    }

    /// Reciprocal characteristic `1/q(t)`; fails near zeros of `q`.
    pub fn integrand(&self, t: f64) -> Result<f64, ReductionError> {
        let mut b = Binding::new(0);
        match &self.var {
            Some(Variable::State(v)) => b.set_var(*v, t),
            Some(Variable::Symbol(s)) => b.set_sym(s, t),
            None => {}
        }
        let q = self.q.eval(&b)?;
        if q.im.abs() > 1e-12 * q.norm().max(1.0) {
            return Err(ReductionError::Invalid(format!("q is not real at {t}")));
        }
        if !q.re.is_finite() || q.re.abs() < EPS_DOM {
            return Err(ReductionError::ZeroCrossing { at: t });
        }
        Ok(1.0 / q.re)
    }

    pub fn eval(&self, x: f64) -> Result<f64, ReductionError> {
        integrate(|t| self.integrand(t), self.x0, x, QUAD_ATOL)
    }
}

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]` to absolute tolerance `atol`.
///
/// A sign change of `f` between nodes is treated as a pole crossing.
pub fn integrate(
    f: impl Fn(f64) -> Result<f64, ReductionError>,
    a: f64,
    b: f64,
    atol: f64,
) -> Result<f64, ReductionError> {
    if a == b {
        return Ok(0.0);
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut sign_ref = None;
    let total = hi - lo;
    let mut stack = vec![(lo, hi, 0u32)];
    let mut sum = 0.0;
    while let Some((l, r, depth)) = stack.pop() {
        let (k, g) = kronrod(&f, l, r, &mut sign_ref)?;
        let err = (k - g).abs();
        let budget = atol * (r - l) / total;
        if err <= budget || (r - l) < 1e-14 * total.max(1.0) {
            sum += k;
            continue;
        }
        if depth >= MAX_DEPTH {
            return Err(ReductionError::Quadrature(format!(
                "no convergence on [{l}, {r}] (error estimate {err:.3e})"
            )));
        }
        let m = 0.5 * (l + r);
        stack.push((m, r, depth + 1));
        stack.push((l, m, depth + 1));
    }
    Ok(sign * sum)
}

fn kronrod(
    f: &impl Fn(f64) -> Result<f64, ReductionError>,
    l: f64,
    r: f64,
    sign_ref: &mut Option<f64>,
) -> Result<(f64, f64), ReductionError> {
    let c = 0.5 * (l + r);
    let h = 0.5 * (r - l);
    let mut eval = |t: f64| -> Result<f64, ReductionError> {
        let v = f(t)?;
        match sign_ref {
            Some(s) if v.signum() != *s => Err(ReductionError::ZeroCrossing { at: t }),
            Some(_) => Ok(v),
            None => {
                *sign_ref = Some(v.signum());
                Ok(v)
            }
        }
    };
    let fc = eval(c)?;
    let mut k = WK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let d = h * XK[i];
        let pair = eval(c - d)? + eval(c + d)?;
        k += WK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    Ok((k * h, g * h))
}
