use clap::{Args, ValueEnum};
use dsym_core::expr::{DomainBox, SampleConfig};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Flags shared by every command.
#[derive(Debug, Clone, Args)]
pub struct RunFlags {
    /// Seed for all random sampling (decimal or 0x-prefixed hex)
    #[arg(long, global = true, env = "DSYM_SEED", value_parser = parse_seed, default_value = "0x5EED")]
    pub seed: u64,
    /// Index window `lo:hi`
    #[arg(long, global = true, value_parser = parse_pair::<i64>, default_value = "0:24")]
    pub window: (i64, i64),
    /// Sample multiplier; 10 is each check's default density
    #[arg(long, global = true, default_value_t = 10)]
    pub samples: usize,
    /// Residual tolerance
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Sampling box `lo:hi` for state values
    #[arg(long = "box", global = true, value_parser = parse_pair::<f64>, default_value = "1.5:5")]
    pub domain: (f64, f64),
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    pub format: Format,
}

pub const DEFAULT_MULTIPLIER: usize = 10;

fn parse_seed(s: &str) -> Result<u64, String> {
    let s = s.trim();
    let parsed = match s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        Some(hex) => u64::from_str_radix(hex, 16),
        None => s.parse(),
    };
    parsed.map_err(|e| format!("invalid seed '{s}': {e}"))
}

fn parse_pair<T: std::str::FromStr>(s: &str) -> Result<(T, T), String>
where
    T::Err: std::fmt::Display,
{
    let (a, b) = s
        .split_once(':')
        .ok_or_else(|| format!("expected 'lo:hi', got '{s}'"))?;
    let a = a.trim().parse().map_err(|e| format!("'{a}': {e}"))?;
    let b = b.trim().parse().map_err(|e| format!("'{b}': {e}"))?;
    Ok((a, b))
}

impl RunFlags {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.tol > 0.0) {
            return Err("--tol must be positive".into());
        }
        if self.window.1 - self.window.0 + 1 < 6 {
            return Err("--window must span at least 6 indices".into());
        }
        if self.samples == 0 {
            return Err("--samples must be positive".into());
        }
        let (lo, hi) = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err("--box needs finite lo < hi".into());
        }
        Ok(())
    }

    /// Sampling configuration; `default_count` is the per-check sample count at multiplier 10.
    pub fn sample_config(&self, default_count: Option<usize>) -> SampleConfig {
        let samples = match default_count {
            Some(d) if self.samples != DEFAULT_MULTIPLIER => {
                Some((d * self.samples).div_ceil(DEFAULT_MULTIPLIER).max(1))
            }
            _ => None,
        };
        SampleConfig {
            seed: self.seed,
            window: self.window,
            samples,
            domain: DomainBox::new(self.domain.0, self.domain.1),
            tol: self.tol,
        }
    }

    pub fn echo(&self) -> Value {
        json!({
            "seed": self.seed,
            "window": [self.window.0, self.window.1],
            "samples": self.samples,
            "tol": self.tol,
            "box": [self.domain.0, self.domain.1],
        })
    }
}
