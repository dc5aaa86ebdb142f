use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::hypothesis::{mann_whitney_u, MwuMethod};
use crate::{Error, Result};

/// How the control group size follows the experimental group size `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerMode {
    /// Both groups have `n` cases.
    Equal,
    /// The control group stays at the given size.
    FixedControl(usize),
    /// Control cases per experimental case stay at `control : experimental`.
    Ratio { control: usize, experimental: usize },
}

impl PowerMode {
    /// The allocation of the pooled comparison: 37 control to 11
    /// experimental cases.
    pub const OBSERVED_RATIO: PowerMode = PowerMode::Ratio {
        control: 37,
        experimental: 11,
    };

    pub fn control_size(self, n: usize) -> usize {
        match self {
            PowerMode::Equal => n,
            PowerMode::FixedControl(c) => c,
            PowerMode::Ratio {
                control,
                experimental,
            } => ((n * control) as f64 / experimental as f64)
                .round()
                .max(1.0) as usize,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PowerConfig {
    pub alpha: f64,
    pub target_power: f64,
    pub replicates: usize,
    pub seed: u64,
    pub max_n: usize,
    /// Test run on every simulated study.
    pub method: MwuMethod,
}

impl Default for PowerConfig {
    fn default() -> Self {
        PowerConfig {
            alpha: 0.05,
            target_power: 0.80,
            replicates: 20_000,
            seed: 0,
            max_n: 10_000,
            method: MwuMethod::Normal { continuity: false },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    /// Smallest experimental group size reaching the target power; `None`
    /// when it is not reached by `max_n`.
    pub required_n: Option<usize>,
    pub control_n: Option<usize>,
    /// Every evaluated `(n, power)` pair, sorted by `n`.
    pub curve: Vec<(usize, f64)>,
}

/// Monte-Carlo power of the two-sided Mann-Whitney test for experimental
/// size `n`. Replicate `r` draws from its own random streams, and larger
/// groups extend the draws of smaller ones, so curves over `n` share
/// their random numbers.
pub fn simulated_power(
    control: Moments,
    experimental: Moments,
    n: usize,
    mode: PowerMode,
    cfg: &PowerConfig,
) -> Result<f64> {
    let nc = mode.control_size(n);
    let dc = Normal::new(control.mean, control.sd)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let de = Normal::new(experimental.mean, experimental.sd)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let hits = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| -> Result<bool> {
            let mut rc = ChaCha8Rng::seed_from_u64(cfg.seed);
            rc.set_stream(2 * r as u64);
            let mut re = ChaCha8Rng::seed_from_u64(cfg.seed);
            re.set_stream(2 * r as u64 + 1);
            let a: Vec<f64> = (0..nc).map(|_| dc.sample(&mut rc)).collect();
            let b: Vec<f64> = (0..n).map(|_| de.sample(&mut re)).collect();
            Ok(mann_whitney_u(&a, &b, cfg.method)?.p_value < cfg.alpha)
        })
        .try_fold(|| 0usize, |acc, hit| hit.map(|h| acc + h as usize))
        .try_reduce(|| 0, |x, y| Ok(x + y))?;
    Ok(hits as f64 / cfg.replicates as f64)
}

/// Smallest experimental group size at which the simulated power reaches
/// the target: doubling to bracket it, then bisection.
pub fn power_analysis(
    control: Moments,
    experimental: Moments,
    mode: PowerMode,
    cfg: &PowerConfig,
) -> Result<PowerResult> {
    if !(control.sd > 0.0 && experimental.sd > 0.0) {
        return Err(Error::InvalidParameter(
            "standard deviations must be positive".into(),
        ));
    }
    if !(cfg.alpha > 0.0 && cfg.alpha < 1.0 && cfg.target_power > 0.0 && cfg.target_power < 1.0) {
        return Err(Error::InvalidParameter(
            "alpha and target power must be in (0, 1)".into(),
        ));
    }
    if cfg.replicates == 0 || cfg.max_n < 2 {
        return Err(Error::InvalidParameter(
            "need replicates > 0 and max_n >= 2".into(),
        ));
    }
    if let PowerMode::Ratio {
        control: c,
        experimental: e,
    } = mode
    {
        if c == 0 || e == 0 {
            return Err(Error::InvalidParameter(
                "ratio parts must be positive".into(),
            ));
        }
    }
    let mut curve = Vec::new();
    let mut eval = |n: usize| -> Result<bool> {
        let p = simulated_power(control, experimental, n, mode, cfg)?;
        curve.push((n, p));
        Ok(p >= cfg.target_power)
    };
    let mut lo = 1;
    let mut hi = 2;
    loop {
        if eval(hi)? {
            break;
        }
        if hi == cfg.max_n {
            curve.sort_by_key(|c| c.0);
            return Ok(PowerResult {
                required_n: None,
                control_n: None,
                curve,
            });
        }
        lo = hi;
        hi = (hi * 2).min(cfg.max_n);
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if eval(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    curve.sort_by_key(|c| c.0);
    Ok(PowerResult {
        required_n: Some(hi),
        control_n: Some(mode.control_size(hi)),
        curve,
    })
}
