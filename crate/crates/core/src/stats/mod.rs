//! Cohort statistics: ingestion of the per-case tables, group summaries,
//! hypothesis tests, correlation and regression, power analysis and the
//! table reproduction report.
//!
//! Standard deviations use the population convention (divide by N), which
//! is what the published summaries use. Sample standard deviations appear
//! only inside the tests that define them.

mod cohort;
mod hypothesis;
mod power;
mod report;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cohort::{
    ingest_clinical, ingest_cohort, ingest_temporal_bone, values, Cohort, CohortRow, Condition,
    Demographics, GroupTag, Metric, Study, CLINICAL_FILE, TEMPORAL_BONE_FILE,
};
pub use hypothesis::{
    brown_forsythe, ks_normality, mann_whitney_u, ols_with_ci, paired_t, pearson, BandPoint,
    Correlation, KsConfig, MwuMethod, OlsFit, TestResult,
};
pub use power::{power_analysis, simulated_power, Moments, PowerConfig, PowerMode, PowerResult};
pub use report::{
    figure3_series, power_report, reproduce_tables, write_regression_csv, CellStatus, Figure3Panel,
    Groups, ReportCell, StatsReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub n: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
}

/// Mean and population standard deviation.
pub fn summarize(x: &[f64]) -> Result<GroupSummary> {
    if x.is_empty() {
        return Err(Error::EmptyGroup("summarize: no values".into()));
    }
    let m = mean(x);
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / x.len() as f64;
    Ok(GroupSummary {
        n: x.len(),
        mean: m,
        sd: var.sqrt(),
    })
}

pub(crate) fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

pub(crate) fn median(x: &[f64]) -> f64 {
    let mut s = x.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        (s[n / 2 - 1] + s[n / 2]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_sd() {
        let s = summarize(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]).unwrap();
        assert_eq!((s.n, s.mean, s.sd), (8, 5.0, 2.0));
        assert!(matches!(summarize(&[]), Err(Error::EmptyGroup(_))));
    }

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}
