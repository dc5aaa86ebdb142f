use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, FisherSnedecor, Normal, StudentsT};

use super::{mean, median};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub test_name: String,
    pub statistic: f64,
    /// Two-sided.
    pub p_value: f64,
    pub n1: usize,
    pub n2: usize,
    pub method_variant: String,
    /// The statistic is undefined; `p_value` is the conventional fallback.
    pub degenerate: bool,
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn two_sided_normal(z: f64) -> f64 {
    (2.0 * standard_normal().sf(z.abs())).min(1.0)
}

fn two_sided_t(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

fn non_empty(name: &str, x: &[f64], min: usize) -> Result<()> {
    if x.len() < min {
        return Err(Error::EmptyGroup(format!(
            "{name} needs at least {min} values, got {}",
            x.len()
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidParameter(format!("{name}: non-finite value")));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MwuMethod {
    /// Exact when `n1 * n2 <= 400` and there are no ties, otherwise the
    /// normal approximation with tie and continuity corrections.
    Auto,
    Exact,
    Normal {
        continuity: bool,
    },
}

/// Mid-ranks of the pooled sample (1-based) and the tie groups' sizes.
fn pooled_ranks(a: &[f64], b: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut all: Vec<(f64, usize)> = a.iter().chain(b).copied().zip(0..).collect();
    all.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut ranks = vec![0.0; all.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for item in &all[i..=j] {
            ranks[item.1] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Number of arrangements giving each value of U for group sizes (m, n),
/// counted exactly.
fn u_counts(m: usize, n: usize) -> Vec<u128> {
    // f[j][u]: arrangements of j items of the first group among the values
    // seen so far, built by adding one pooled position at a time.
    let max_u = m * n;
    let mut f = vec![vec![0u128; max_u + 1]; m + 1];
    f[0][0] = 1;
    for pos in 0..(m + n) {
        for j in (0..m.min(pos + 1)).rev() {
            let seconds_before = pos - j;
            if seconds_before > n {
                continue;
            }
            for u in (0..=max_u - seconds_before).rev() {
                let c = f[j][u];
                if c != 0 {
                    f[j + 1][u + seconds_before] += c;
                }
            }
        }
    }
    f.swap_remove(m)
}

/// Two-sided Mann-Whitney U test; the statistic is U of `a`.
pub fn mann_whitney_u(a: &[f64], b: &[f64], method: MwuMethod) -> Result<TestResult> {
    non_empty("mann_whitney_u sample a", a, 1)?;
    non_empty("mann_whitney_u sample b", b, 1)?;
    let (n1, n2) = (a.len(), b.len());
    let (ranks, ties) = pooled_ranks(a, b);
    let r1: f64 = ranks[..n1].iter().sum();
    let u = r1 - (n1 * (n1 + 1)) as f64 / 2.0;
    let method = match method {
        MwuMethod::Auto if n1 * n2 <= 400 && ties.is_empty() => MwuMethod::Exact,
        MwuMethod::Auto => MwuMethod::Normal { continuity: true },
        m => m,
    };
    let result = |p: f64, variant: String, degenerate: bool| TestResult {
        test_name: "mann_whitney_u".into(),
        statistic: u,
        p_value: p.clamp(0.0, 1.0),
        n1,
        n2,
        method_variant: variant,
        degenerate,
    };
    match method {
        MwuMethod::Exact => {
            if !ties.is_empty() {
                return Err(Error::InvalidParameter(
                    "exact Mann-Whitney distribution needs untied data".into(),
                ));
            }
            let counts = u_counts(n1, n2);
            let total: u128 = counts.iter().sum();
            let k = u.round() as usize;
            let below: u128 = counts[..=k].iter().sum();
            let above: u128 = counts[k..].iter().sum();
            let p = 2.0 * below.min(above) as f64 / total as f64;
            Ok(result(p, "exact".into(), false))
        }
        MwuMethod::Normal { continuity } => {
            let n = (n1 + n2) as f64;
            let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>()
                / (n * (n - 1.0)).max(1.0);
            let var = (n1 * n2) as f64 / 12.0 * ((n + 1.0) - tie_term);
            let variant = format!(
                "normal, tie-corrected, {} continuity correction",
                if continuity { "with" } else { "no" }
            );
            if var <= 0.0 {
                return Ok(result(1.0, variant, true));
            }
            let cc = if continuity { 0.5 } else { 0.0 };
            let dev = ((u - (n1 * n2) as f64 / 2.0).abs() - cc).max(0.0);
            Ok(result(two_sided_normal(dev / var.sqrt()), variant, false))
        }
        MwuMethod::Auto => unreachable!(),
    }
}

/// Two-sided paired t test on `before - after`.
pub fn paired_t(before: &[f64], after: &[f64]) -> Result<TestResult> {
    if before.len() != after.len() {
        return Err(Error::LengthMismatch {
            left: before.len(),
            right: after.len(),
        });
    }
    non_empty("paired_t", before, 2)?;
    non_empty("paired_t", after, 2)?;
    let d: Vec<f64> = before.iter().zip(after).map(|(x, y)| x - y).collect();
    let n = d.len() as f64;
    let m = mean(&d);
    let sd = (d.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    let base = TestResult {
        test_name: "paired_t".into(),
        statistic: 0.0,
        p_value: 1.0,
        n1: d.len(),
        n2: d.len(),
        method_variant: format!("Student t, df = {}", d.len() - 1),
        degenerate: false,
    };
    if sd == 0.0 {
        let (statistic, p) = if m == 0.0 {
            (0.0, 1.0)
        } else {
            (m.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TestResult {
            statistic,
            p_value: p,
            degenerate: true,
            ..base
        });
    }
    let t = m / (sd / n.sqrt());
    Ok(TestResult {
        statistic: t,
        p_value: two_sided_t(t, n - 1.0),
        ..base
    })
}

/// Brown-Forsythe test for equal spread: one-way ANOVA on absolute
/// deviations from each group's median.
pub fn brown_forsythe(a: &[f64], b: &[f64]) -> Result<TestResult> {
    non_empty("brown_forsythe sample a", a, 2)?;
    non_empty("brown_forsythe sample b", b, 2)?;
    let dev = |x: &[f64]| {
        let med = median(x);
        x.iter().map(|v| (v - med).abs()).collect::<Vec<f64>>()
    };
    let groups = [dev(a), dev(b)];
    let n_total = (a.len() + b.len()) as f64;
    let grand = groups.iter().flatten().sum::<f64>() / n_total;
    let mut between = 0.0;
    let mut within = 0.0;
    for g in &groups {
        let m = mean(g);
        between += g.len() as f64 * (m - grand).powi(2);
        within += g.iter().map(|z| (z - m).powi(2)).sum::<f64>();
    }
    let (df1, df2) = (1.0, n_total - 2.0);
    let base = TestResult {
        test_name: "brown_forsythe".into(),
        statistic: 0.0,
        p_value: 1.0,
        n1: a.len(),
        n2: b.len(),
        method_variant: format!("median-centred Levene, F({df1}, {df2})"),
        degenerate: false,
    };
    if within == 0.0 {
        let (statistic, p) = if between == 0.0 {
            (0.0, 1.0)
        } else {
            (f64::INFINITY, 0.0)
        };
        return Ok(TestResult {
            statistic,
            p_value: p,
            degenerate: true,
            ..base
        });
    }
    let f = (between / df1) / (within / df2);
    let dist = FisherSnedecor::new(df1, df2).expect("positive df");
    Ok(TestResult {
        statistic: f,
        p_value: dist.sf(f).clamp(0.0, 1.0),
        ..base
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KsConfig {
    pub replicates: usize,
    pub seed: u64,
}

impl Default for KsConfig {
    fn default() -> Self {
        KsConfig {
            replicates: 2000,
            seed: 0,
        }
    }
}

/// Largest gap between the empirical CDF of `x` and the normal CDF with
/// the sample's mean and standard deviation (n - 1 denominator).
fn lilliefors_d(x: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let m = mean(x);
    let sd = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
    if sd == 0.0 || !sd.is_finite() {
        return None;
    }
    let mut s: Vec<f64> = x.iter().map(|v| (v - m) / sd).collect();
    s.sort_by(f64::total_cmp);
    let phi = standard_normal();
    let mut d: f64 = 0.0;
    for (i, z) in s.iter().enumerate() {
        let f = phi.cdf(*z);
        d = d.max((i + 1) as f64 / n - f).max(f - i as f64 / n);
    }
    Some(d)
}

/// One-sample Kolmogorov-Smirnov test of normality with estimated
/// parameters; the p-value comes from seeded Monte-Carlo replicates of the
/// same statistic under normal sampling.
pub fn ks_normality(x: &[f64], cfg: &KsConfig) -> Result<TestResult> {
    non_empty("ks_normality", x, 4)?;
    if cfg.replicates == 0 {
        return Err(Error::InvalidParameter(
            "ks_normality needs at least one replicate".into(),
        ));
    }
    let base = TestResult {
        test_name: "ks_normality".into(),
        statistic: 0.0,
        p_value: 1.0,
        n1: x.len(),
        n2: 0,
        method_variant: format!(
            "Lilliefors, Monte Carlo ({} replicates, seed {})",
            cfg.replicates, cfg.seed
        ),
        degenerate: false,
    };
    let Some(d) = lilliefors_d(x) else {
        return Ok(TestResult {
            degenerate: true,
            ..base
        });
    };
    let n = x.len();
    let exceed = (0..cfg.replicates)
        .into_par_iter()
        .filter(|&r| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(r as u64);
            let sample: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            lilliefors_d(&sample).is_some_and(|s| s >= d)
        })
        .count();
    Ok(TestResult {
        statistic: d,
        p_value: (exceed + 1) as f64 / (cfg.replicates + 1) as f64,
        ..base
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    pub p_value: f64,
    pub n: usize,
}

fn centered_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
        sxy += (a - mx) * (b - my);
    }
    (mx, my, sxx, syy, sxy)
}

/// Pearson correlation with the two-sided t-test p-value, df = n - 2.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    non_empty("pearson", x, 3)?;
    non_empty("pearson", y, 3)?;
    let (_, _, sxx, syy, sxy) = centered_sums(x, y);
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Degenerate(
            "pearson: a variable has zero variance".into(),
        ));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (x.len() - 2) as f64;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        two_sided_t(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok(Correlation {
        r,
        p_value: p,
        n: x.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub x: f64,
    pub fit: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub slope: f64,
    pub intercept: f64,
    pub level: f64,
    pub n: usize,
    mean_x: f64,
    sxx: f64,
    residual_se: f64,
    t_quantile: f64,
    /// Confidence band of the mean response, sampled across the x range.
    pub band: Vec<BandPoint>,
}

impl OlsFit {
    /// Confidence interval of the mean response at `x`.
    pub fn band_at(&self, x: f64) -> BandPoint {
        let fit = self.intercept + self.slope * x;
        let half = self.t_quantile
            * self.residual_se
            * (1.0 / self.n as f64 + (x - self.mean_x).powi(2) / self.sxx).sqrt();
        BandPoint {
            x,
            fit,
            lower: fit - half,
            upper: fit + half,
        }
    }
}

/// Least-squares line with a pointwise confidence band for the mean
/// response, sampled at `samples` evenly spaced x values.
pub fn ols_with_ci(x: &[f64], y: &[f64], level: f64, samples: usize) -> Result<OlsFit> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    non_empty("ols_with_ci", x, 3)?;
    non_empty("ols_with_ci", y, 3)?;
    if !(level > 0.0 && level < 1.0) || samples < 2 {
        return Err(Error::InvalidParameter(
            "level must be in (0, 1) and samples >= 2".into(),
        ));
    }
    let (mx, my, sxx, _, sxy) = centered_sums(x, y);
    if sxx == 0.0 {
        return Err(Error::Degenerate("ols_with_ci: x has zero variance".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let n = x.len();
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - intercept - slope * a).powi(2))
        .sum();
    let df = (n - 2) as f64;
    let t = StudentsT::new(0.0, 1.0, df)
        .expect("positive df")
        .inverse_cdf((1.0 + level) / 2.0);
    let mut fit = OlsFit {
        slope,
        intercept,
        level,
        n,
        mean_x: mx,
        sxx,
        residual_se: (sse / df).sqrt(),
        t_quantile: t,
        band: Vec::new(),
    };
    let lo = x.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = x.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    fit.band = (0..samples)
        .map(|i| fit.band_at(lo + (hi - lo) * i as f64 / (samples - 1) as f64))
        .collect();
    Ok(fit)
}
