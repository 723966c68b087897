//! Exponent sequences of the golden-ratio reduction and its closed-form solution.
//!
//! With `G = 1 + √5`, `g = −1 + √5` and `r = g/G`,
//! `αₙ = (G − g·rⁿ⁻¹) / (2(1 + rⁿ⁻¹))` and `βₙ = (G + g·rⁿ⁻¹) / (2(1 − rⁿ⁻¹))`.
//! Dividing through by `Gⁿ⁻¹` keeps every quantity bounded.

use serde::Serialize;

use super::ReductionError;

fn constants() -> (f64, f64, f64) {
    let s5 = 5f64.sqrt();
    let big = 1.0 + s5;
    let small = s5 - 1.0;
    (big, small, small / big)
}

fn ratio_power(n: i64) -> f64 {
    let (_, _, r) = constants();
    r.powi((n - 1) as i32)
}

/// `αₙ`; defined for every `n` (`α₀ = 0`).
pub fn alpha(n: i64) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (big, small, _) = constants();
    let p = ratio_power(n);
    (big - small * p) / (2.0 * (1.0 + p))
}

/// `βₙ`; infinite at `n = 1`.
pub fn beta(n: i64) -> Option<f64> {
    if n == 1 {
        return None;
    }
    let (big, small, _) = constants();
    let p = ratio_power(n);
    Some((big + small * p) / (2.0 * (1.0 - p)))
}

/// `1/αₙ`; infinite at `n = 0`.
pub fn inv_alpha(n: i64) -> Option<f64> {
    if n == 0 {
        return None;
    }
    let (big, small, _) = constants();
    let p = ratio_power(n);
    Some(2.0 * (1.0 + p) / (big - small * p))
}

/// `1/βₙ`; zero at `n = 1`.
pub fn inv_beta(n: i64) -> f64 {
    if n == 1 {
        return 0.0;
    }
    let (big, small, _) = constants();
    let p = ratio_power(n);
    2.0 * (1.0 - p) / (big + small * p)
}

/// `(αₙ, βₙ)` for `n ≥ 1`.
pub fn alpha_beta(n: i64) -> Result<(f64, f64), ReductionError> {
    if n < 1 {
        return Err(ReductionError::Undefined(format!(
            "α, β need n ≥ 1, got {n}"
        )));
    }
    let b = beta(n).ok_or_else(|| {
        ReductionError::Undefined(format!("β has a vanishing denominator at n = {n}"))
    })?;
    Ok((alpha(n), b))
}

/// Parity-split product-exponent solution of
/// `u_{n+1} = v_n^(−1/αₙ)`, `v_{n+1} = u_n^(−1/βₙ)`.
///
/// Even `n`: `u = u₀^(1/Π β_{2k}α_{2k+1})`, `v = v₀^(1/Π α_{2k}β_{2k+1})` over `k < n/2`.
/// Odd `n`: `u = v₀^(−1/(Π_{k≤(n−1)/2} α_{2k} · Π_{k≤(n−3)/2} β_{2k+1}))` and `v` likewise
/// with `α ↔ β` and `u₀`. Each exponent is evaluated as a product of reciprocals; a
/// component whose product involves an infinite reciprocal is `None`.
pub fn closed_form_uv(
    n: i64,
    u0: f64,
    v0: f64,
) -> Result<(Option<f64>, Option<f64>), ReductionError> {
    if n < 0 {
        return Err(ReductionError::Undefined(format!(
            "closed form needs n ≥ 0, got {n}"
        )));
    }
    if u0 <= 0.0 || v0 <= 0.0 {
        return Err(ReductionError::Undefined(
            "closed form needs u0, v0 > 0".into(),
        ));
    }
    let inv_a = |m: i64| inv_alpha(m);
    let inv_b = |m: i64| Some(inv_beta(m));
    let product = |even: &dyn Fn(i64) -> Option<f64>,
                   odd: &dyn Fn(i64) -> Option<f64>,
                   even_hi: i64,
                   odd_hi: i64|
     -> Option<f64> {
        let mut p = 1.0;
        for k in 0..=even_hi {
            p *= even(2 * k)?;
        }
        for k in 0..=odd_hi {
            p *= odd(2 * k + 1)?;
        }
        Some(p)
    };
    if n % 2 == 0 {
        let h = n / 2 - 1;
        let eu = product(&inv_b, &inv_a, h, h);
        let ev = product(&inv_a, &inv_b, h, h);
        Ok((eu.map(|e| u0.powf(e)), ev.map(|e| v0.powf(e))))
    } else {
        let eu = product(&inv_a, &inv_b, (n - 1) / 2, (n - 3) / 2);
        let ev = product(&inv_b, &inv_a, (n - 1) / 2, (n - 3) / 2);
        Ok((eu.map(|e| v0.powf(-e)), ev.map(|e| u0.powf(-e))))
    }
}

/// Direct iteration of `u_{n+1} = v_n^(−1/αₙ)`, `v_{n+1} = u_n^(−1/βₙ)` from index 0.
///
/// An undefined value propagates: an exponent `1/α₀` is infinite, and `x^0` of an undefined
/// `x` stays undefined.
pub fn iterate_reduced_map(u0: f64, v0: f64, steps: usize) -> Vec<(Option<f64>, Option<f64>)> {
    let mut out = vec![(Some(u0), Some(v0))];
    for n in 0..steps as i64 {
        let (u, v) = out[n as usize];
        let next_u = match (v, inv_alpha(n)) {
            (Some(v), Some(e)) => Some(v.powf(-e)),
            _ => None,
        };
        let next_v = u.map(|u| u.powf(-inv_beta(n)));
        out.push((next_u, next_v));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormRow {
    pub n: i64,
    pub closed: (Option<f64>, Option<f64>),
    pub iterated: (Option<f64>, Option<f64>),
    /// Worst relative difference over components defined on both sides.
    pub deviation: f64,
    /// Definedness agrees between the closed form and the iteration.
    pub consistent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClosedFormComparison {
    pub u0: f64,
    pub v0: f64,
    pub rows: Vec<ClosedFormRow>,
    pub max_deviation: f64,
    pub undefined: usize,
    pub passed: bool,
}

/// Compare [`closed_form_uv`] with [`iterate_reduced_map`] for `n = 0..=last`.
pub fn compare_closed_form(
    u0: f64,
    v0: f64,
    last: i64,
    tol: f64,
) -> Result<ClosedFormComparison, ReductionError> {
    let iter = iterate_reduced_map(u0, v0, last.max(0) as usize);
    let mut rows = Vec::new();
    let mut max_deviation = 0.0f64;
    let mut undefined = 0;
    let mut consistent_all = true;
    for n in 0..=last {
        let closed = closed_form_uv(n, u0, v0)?;
        let iterated = iter[n as usize];
        let mut deviation = 0.0f64;
        let mut consistent = true;
        for (a, b) in [(closed.0, iterated.0), (closed.1, iterated.1)] {
            match (a, b) {
                (Some(a), Some(b)) => {
                    let d = (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
                    deviation = deviation.max(d);
                }
                (None, None) => undefined += 1,
                _ => consistent = false,
            }
        }
        max_deviation = max_deviation.max(deviation);
        consistent_all &= consistent;
        rows.push(ClosedFormRow {
            n,
            closed,
            iterated,
            deviation,
            consistent,
        });
    }
    Ok(ClosedFormComparison {
        u0,
        v0,
        rows,
        max_deviation,
        undefined,
        passed: consistent_all && max_deviation < tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    // Direct evaluation of the defining quotients, as an independent reference.
    fn alpha_direct(n: i32) -> f64 {
        let s5 = 5f64.sqrt();
        ((1.0 + s5).powi(n) - (s5 - 1.0).powi(n))
            / (2.0 * ((1.0 + s5).powi(n - 1) + (s5 - 1.0).powi(n - 1)))
    }

    fn beta_direct(n: i32) -> f64 {
        let s5 = 5f64.sqrt();
        ((1.0 + s5).powi(n) + (s5 - 1.0).powi(n))
            / (2.0 * ((1.0 + s5).powi(n - 1) - (s5 - 1.0).powi(n - 1)))
    }

    #[test]
    fn first_values() {
        assert!((alpha(1) - 0.5).abs() < 1e-15);
        assert_eq!(alpha(0), 0.0);
        assert!((beta(0).unwrap() + 2.0).abs() < 1e-14);
        assert!(beta(1).is_none());
        assert!(inv_alpha(0).is_none());
        assert_eq!(inv_beta(1), 0.0);
        assert!(alpha_beta(1).is_err());
        assert!(alpha_beta(0).is_err());
    }

    #[test]
    fn scaled_forms_match_the_quotients() {
        for n in 2..30 {
            assert!((alpha(n as i64) - alpha_direct(n)).abs() < 1e-12);
            assert!((beta(n as i64).unwrap() - beta_direct(n)).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_identities() {
        for n in 1..=50 {
            assert!((alpha(n + 1) - 1.0 - inv_beta(n)).abs() < 1e-12);
            assert!((beta(n + 1).unwrap() - 1.0 - inv_alpha(n).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_steps_return_the_start() {
        assert_eq!(closed_form_uv(0, 2.0, 3.0).unwrap(), (Some(2.0), Some(3.0)));
    }

    #[test]
    fn second_index_by_hand() {
        // v₁ = u₀^(1/2), u₂ = v₁^(−2) = 1/u₀.
        let (u, v) = closed_form_uv(2, 4.0, 3.0).unwrap();
        assert!((u.unwrap() - 0.25).abs() < 1e-15);
        assert!(v.is_none());
        let (u1, v1) = closed_form_uv(1, 4.0, 3.0).unwrap();
        assert!(u1.is_none());
        assert!((v1.unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn agrees_with_iteration() {
        let c = compare_closed_form(1.7, 0.6, 12, 1e-9).unwrap();
        assert!(c.passed, "{c:?}");
        assert_eq!(c.undefined, 12);
    }
}
