//! Summary statistics and the unpaired Welch test.

use std::collections::BTreeMap;

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::output::{CurveRow, TrialRecord};

#[derive(Debug, thiserror::Error, Clone, PartialEq, Eq)]
pub enum StatsError {
    #[error("each sample needs at least two values")]
    TooFewSamples,
    #[error("both samples have zero variance")]
    DegenerateVariance,
}

/// Sample mean and standard deviation (n - 1 denominator; 0 for one value).
pub fn mean_sd(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgoSummary {
    pub algo: String,
    pub trials: usize,
    pub converged: usize,
    pub interactions: (f64, f64),
    pub success: (f64, f64),
}

/// Mean and SD of interactions and final success per algorithm, in name order.
pub fn summarize(records: &[TrialRecord]) -> Vec<AlgoSummary> {
    let mut by_algo: BTreeMap<&str, Vec<&TrialRecord>> = BTreeMap::new();
    for r in records {
        by_algo.entry(&r.algo).or_default().push(r);
    }
    by_algo
        .into_iter()
        .map(|(algo, rs)| {
            let inter: Vec<f64> = rs.iter().map(|r| r.total_interactions as f64).collect();
            let succ: Vec<f64> = rs.iter().map(|r| r.final_success_rate).collect();
            AlgoSummary {
                algo: algo.to_string(),
                trials: rs.len(),
                converged: rs.iter().filter(|r| r.converged).count(),
                interactions: mean_sd(&inter),
                success: mean_sd(&succ),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Welch {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<Welch, StatsError> {
    if a.len() < 2 || b.len() < 2 {
        return Err(StatsError::TooFewSamples);
    }
    let (ma, sa) = mean_sd(a);
    let (mb, sb) = mean_sd(b);
    let va = sa * sa / a.len() as f64;
    let vb = sb * sb / b.len() as f64;
    if va == 0.0 && vb == 0.0 {
        return Err(StatsError::DegenerateVariance);
    }
    let t = (ma - mb) / (va + vb).sqrt();
    let df = (va + vb).powi(2) / (va * va / (a.len() as f64 - 1.0) + vb * vb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.sf(t.abs())).min(1.0);
    Ok(Welch { t, df, p })
}

/// First composed-curve stamp of (`algo`, `seed`) at or above `threshold`.
pub fn time_to_threshold(curves: &[CurveRow], algo: &str, seed: u64, threshold: f64) -> Option<u64> {
    curves
        .iter()
        .filter(|c| c.algo == algo && c.seed == seed && c.edge.is_none() && c.success_rate >= threshold)
        .map(|c| c.stamp)
        .min()
}
