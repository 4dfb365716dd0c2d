//! One-way fit on Levene-transformed data and the classical global F test.

use serde::Serialize;
use statrs::function::beta::beta_reg;

use crate::contrasts::ContrastMatrix;
use crate::error::{Error, Result};
use crate::transform::TransformedSample;

/// Group means, pooled standard deviation and residual df of a one-way fit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitSummary {
    pub group_means: Vec<f64>,
    pub group_sizes: Vec<usize>,
    pub pooled_sd: f64,
    pub df_resid: usize,
}

impl FitSummary {
    /// Fits directly from per-group values.
    pub fn from_groups<'a, I>(groups: I) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [f64]>,
    {
        let mut group_means = Vec::new();
        let mut group_sizes = Vec::new();
        let mut ss_within = 0.0;
        for values in groups {
            if values.is_empty() {
                return Err(Error::InsufficientData("empty group after transformation".into()));
            }
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            ss_within += values.iter().map(|z| (z - mean).powi(2)).sum::<f64>();
            group_means.push(mean);
            group_sizes.push(values.len());
        }
        let total: usize = group_sizes.iter().sum();
        if total <= group_sizes.len() {
            return Err(Error::InsufficientData(format!(
                "{total} observations in {} groups leave no residual degrees of freedom",
                group_sizes.len()
            )));
        }
        let df_resid = total - group_sizes.len();
        Ok(Self {
            group_means,
            group_sizes,
            pooled_sd: (ss_within / df_resid as f64).sqrt(),
            df_resid,
        })
    }

    pub fn is_degenerate(&self) -> bool {
        self.pooled_sd == 0.0
    }
}

pub fn fit_oneway(t: &TransformedSample<'_>) -> Result<FitSummary> {
    FitSummary::from_groups(t.groups().iter().map(|g| g.values.as_slice()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContrastEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub tstat: f64,
}

/// Estimate, standard error and t statistic of one contrast row.
pub fn contrast_estimate(f: &FitSummary, m: &ContrastMatrix, row: usize) -> Result<ContrastEstimate> {
    if m.group_sizes() != f.group_sizes.as_slice() {
        return Err(Error::Argument(format!(
            "contrast built for group sizes {:?} but fit has {:?}",
            m.group_sizes(),
            f.group_sizes
        )));
    }
    if row >= m.num_rows() {
        return Err(Error::Argument(format!(
            "row {row} out of range for {} contrasts",
            m.num_rows()
        )));
    }
    if f.is_degenerate() {
        return Err(Error::DegenerateFit(
            "pooled standard deviation is zero, t statistics are undefined".into(),
        ));
    }
    let estimate: f64 = m.row(row).iter().zip(&f.group_means).map(|(c, y)| c * y).sum();
    let stderr = f.pooled_sd * m.variance_factor(row).sqrt();
    Ok(ContrastEstimate {
        estimate,
        stderr,
        tstat: estimate / stderr,
    })
}

/// Upper tail of the central F distribution.
pub fn f_upper_tail(fstat: f64, df1: usize, df2: usize) -> f64 {
    if fstat <= 0.0 {
        return 1.0;
    }
    if fstat.is_infinite() {
        return 0.0;
    }
    let (d1, d2) = (df1 as f64, df2 as f64);
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * fstat)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FTest {
    pub fstat: f64,
    pub df1: usize,
    pub df2: usize,
    pub pvalue: f64,
}

/// One-way ANOVA F test on the transformed values (Brown-Forsythe when the
/// input is the median-centred Levene transform).
pub fn brown_forsythe_f(t: &TransformedSample<'_>) -> Result<FTest> {
    let fit = fit_oneway(t)?;
    let total: usize = fit.group_sizes.iter().sum();
    let grand = fit
        .group_means
        .iter()
        .zip(&fit.group_sizes)
        .map(|(m, &n)| m * n as f64)
        .sum::<f64>()
        / total as f64;
    let ss_between: f64 = fit
        .group_means
        .iter()
        .zip(&fit.group_sizes)
        .map(|(m, &n)| n as f64 * (m - grand).powi(2))
        .sum();
    let ss_within = fit.pooled_sd.powi(2) * fit.df_resid as f64;
    if ss_within == 0.0 {
        return Err(Error::DegenerateFit(
            "no within-group variation in the transformed data".into(),
        ));
    }
    let df1 = fit.group_sizes.len() - 1;
    let df2 = fit.df_resid;
    let fstat = (ss_between / df1 as f64) / (ss_within / df2 as f64);
    Ok(FTest {
        fstat,
        df1,
        df2,
        pvalue: f_upper_tail(fstat, df1, df2),
    })
}
