use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Binding, Component, EvalError, Expr, SeqTable, VarRef};

pub const DEFAULT_SEED: u64 = 0x5EED;

/// Closed interval from which state values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DomainBox {
    pub lo: f64,
    pub hi: f64,
}

impl Default for DomainBox {
    fn default() -> Self {
        DomainBox { lo: 1.5, hi: 5.0 }
    }
}

impl DomainBox {
    pub fn new(lo: f64, hi: f64) -> Self {
        DomainBox { lo, hi }
    }
}

/// Shared sampling knobs for the numerical checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleConfig {
    pub seed: u64,
    pub window: (i64, i64),
    /// Samples per index; `None` lets each check pick its own default.
    pub samples: Option<usize>,
    pub domain: DomainBox,
    pub tol: f64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            seed: DEFAULT_SEED,
            window: (0, 24),
            samples: None,
            domain: DomainBox::default(),
            tol: 1e-9,
        }
    }
}

/// Deterministic random source.
#[derive(Debug, Clone)]
pub struct Sampler {
    rng: ChaCha8Rng,
    domain: DomainBox,
}

impl Sampler {
    pub fn new(seed: u64, domain: DomainBox) -> Self {
        Sampler {
            rng: ChaCha8Rng::seed_from_u64(seed),
            domain,
        }
    }

    pub fn from_config(cfg: &SampleConfig) -> Self {
        Sampler::new(cfg.seed, cfg.domain)
    }

    pub fn domain(&self) -> DomainBox {
        self.domain
    }

    pub fn value(&mut self) -> f64 {
        self.rng.random_range(self.domain.lo..=self.domain.hi)
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.random_range(lo..=hi)
    }

    pub fn index(&mut self, window: (i64, i64)) -> i64 {
        self.rng.random_range(window.0..=window.1)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Bind `x[n..n+max_offset]`, `y[..]` and every free symbol to fresh box samples.
pub fn random_binding<'a>(
    exprs: &[&Expr],
    n: i64,
    sampler: &mut Sampler,
    seqs: Option<&'a SeqTable>,
) -> Binding<'a> {
    let max_off = exprs
        .iter()
        .filter_map(|e| e.max_offset())
        .max()
        .unwrap_or(0);
    let mut b = Binding::new(n);
    if let Some(s) = seqs {
        b = b.with_seqs(s);
    }
    for off in 0..=max_off {
        for c in Component::ALL {
            b.set_var(VarRef::new(c, off), sampler.value());
        }
    }
    let mut syms = std::collections::BTreeSet::new();
    for e in exprs {
        syms.extend(e.syms());
    }
    for s in syms {
        b.set_sym(&s, sampler.value());
    }
    b
}

/// Numerical equality at random points: `|a - b| <= tol * (1 + |a|)` wherever both are defined.
///
/// Points where either side hits a domain error are skipped and redrawn, up to a budget.
pub fn equal_numeric(
    a: &Expr,
    b: &Expr,
    samples: usize,
    tol: f64,
    cfg: &SampleConfig,
    seqs: Option<&SeqTable>,
) -> Result<bool, EvalError> {
    let mut sampler = Sampler::from_config(cfg);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < samples {
        attempts += 1;
        if attempts > samples * 10 + 10 {
            break;
        }
        let n = sampler.index(cfg.window);
        let bind = random_binding(&[a, b], n, &mut sampler, seqs);
        let (va, vb) = match (a.eval(&bind), b.eval(&bind)) {
            (Ok(va), Ok(vb)) => (va, vb),
            (Err(e), _) | (_, Err(e)) if e.is_domain() => continue,
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        if (va - vb).norm() > tol * (1.0 + va.norm()) {
            return Ok(false);
        }
        checked += 1;
    }
    Ok(checked > 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn equal_numeric_detects_identity() {
        let cfg = SampleConfig::default();
        let a = parse("(x[n] + 1)^2").unwrap();
        let b = parse("x[n]^2 + 2*x[n] + 1").unwrap();
        assert!(equal_numeric(&a, &b, 50, 1e-12, &cfg, None).unwrap());
        let c = parse("x[n]^2 + 2*x[n]").unwrap();
        assert!(!equal_numeric(&a, &c, 50, 1e-12, &cfg, None).unwrap());
    }

    #[test]
    fn sampler_is_deterministic() {
        let mut a = Sampler::new(7, DomainBox::default());
        let mut b = Sampler::new(7, DomainBox::default());
        for _ in 0..10 {
            assert_eq!(a.value(), b.value());
        }
    }
}
