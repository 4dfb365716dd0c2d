//! Single-step maxT inference on Levene-transformed data.
//!
//! [`max_t_test`] runs the whole pipeline: transform, one-way fit, contrast
//! t statistics, adjusted p-values from the joint multivariate t
//! distribution, simultaneous confidence bounds and the global min-p.
//! [`MaxTProcedure`] holds everything that depends only on the design, so a
//! simulation can evaluate many samples against one sampled null distribution.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize, Serializer};

use crate::anova::{contrast_estimate, fit_oneway, ContrastEstimate, FitSummary};
use crate::contrasts::{correlation_from_contrasts, ContrastKind, ContrastMatrix, CorrelationMatrix};
use crate::dataset::GroupedSample;
use crate::error::{Error, Result};
use crate::mvt::{MaxTDistribution, MvtSettings, Sides};
use crate::transform::{levene_transform, modified_levene_transform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    /// Treatment (or group) spread larger than the reference.
    Greater,
    Less,
    TwoSided,
}

impl Alternative {
    pub fn sides(self) -> Sides {
        match self {
            Alternative::TwoSided => Sides::TwoSided,
            Alternative::Greater | Alternative::Less => Sides::OneSided,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestSpec {
    pub contrast_kind: ContrastKind,
    pub alternative: Alternative,
    /// Use the trimmed transform (drop the structural zero of odd groups).
    pub modified: bool,
    pub alpha: f64,
    pub mvt_settings: MvtSettings,
}

impl Default for TestSpec {
    fn default() -> Self {
        Self {
            contrast_kind: ContrastKind::Dunnett,
            alternative: Alternative::Greater,
            modified: false,
            alpha: 0.05,
            mvt_settings: MvtSettings::default(),
        }
    }
}

impl TestSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha {} is outside (0, 1)", self.alpha)));
        }
        self.mvt_settings.validate()
    }
}

fn serialize_bound<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_infinite() {
        s.serialize_str(if *v > 0.0 { "inf" } else { "-inf" })
    } else {
        s.serialize_f64(*v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastRow {
    pub label: String,
    pub estimate: f64,
    pub stderr: f64,
    pub tstat: f64,
    pub adj_p: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub ci_low: f64,
    #[serde(serialize_with = "serialize_bound")]
    pub ci_high: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestReport {
    pub rows: Vec<ContrastRow>,
    pub global_min_p: f64,
    pub quantile_used: f64,
    pub df: usize,
    pub correlation: CorrelationMatrix,
    pub group_labels: Vec<String>,
    /// Group sizes entering the fit (after any trimming).
    pub group_sizes: Vec<usize>,
    pub pooled_sd: f64,
    pub spec: TestSpec,
}

/// Simultaneous bounds for one contrast given the equicoordinate quantile.
pub fn ci_bounds(estimate: f64, stderr: f64, quantile: f64, alternative: Alternative) -> (f64, f64) {
    let half = quantile * stderr;
    match alternative {
        Alternative::Greater => (estimate - half, f64::INFINITY),
        Alternative::Less => (f64::NEG_INFINITY, estimate + half),
        Alternative::TwoSided => (estimate - half, estimate + half),
    }
}

fn fit_sizes(sample: &GroupedSample, modified: bool) -> Result<Vec<usize>> {
    sample
        .groups()
        .iter()
        .map(|g| {
            let n = g.values.len();
            match (modified, n % 2 == 1) {
                (true, true) if n == 1 => Err(Error::DegenerateGroup(g.label.clone())),
                (true, true) => Ok(n - 1),
                _ => Ok(n),
            }
        })
        .collect()
}

/// Design-dependent part of the maxT test: contrasts, their correlation and
/// the sampled null distribution of the maximum statistic.
#[derive(Debug)]
pub struct MaxTProcedure {
    spec: TestSpec,
    contrasts: ContrastMatrix,
    correlation: CorrelationMatrix,
    distribution: MaxTDistribution,
    quantile: OnceLock<f64>,
}

impl MaxTProcedure {
    /// Prepares the procedure for samples shaped like `sample` (same labels
    /// and group sizes, control first).
    pub fn for_sample(sample: &GroupedSample, spec: &TestSpec) -> Result<Self> {
        let sizes = fit_sizes(sample, spec.modified)?;
        Self::for_design(&sizes, Some(&sample.labels()), spec)
    }

    /// `fit_sizes` are the group sizes entering the fit, i.e. after trimming.
    pub fn for_design(fit_sizes: &[usize], group_names: Option<&[String]>, spec: &TestSpec) -> Result<Self> {
        spec.mvt_settings.validate()?;
        let contrasts = ContrastMatrix::build(spec.contrast_kind, fit_sizes, group_names)?;
        let total: usize = fit_sizes.iter().sum();
        if total <= fit_sizes.len() {
            return Err(Error::InsufficientData(format!(
                "{total} observations in {} groups leave no residual degrees of freedom",
                fit_sizes.len()
            )));
        }
        let df = total - fit_sizes.len();
        let correlation = correlation_from_contrasts(&contrasts)?;
        let distribution =
            MaxTDistribution::sample(&correlation, df, spec.alternative.sides(), &spec.mvt_settings)?;
        Ok(Self {
            spec: *spec,
            contrasts,
            correlation,
            distribution,
            quantile: OnceLock::new(),
        })
    }

    pub fn spec(&self) -> &TestSpec {
        &self.spec
    }

    pub fn contrasts(&self) -> &ContrastMatrix {
        &self.contrasts
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    pub fn df(&self) -> usize {
        self.distribution.df()
    }

    /// Equicoordinate `1 - alpha` quantile of the null distribution.
    pub fn quantile(&self) -> Result<f64> {
        if let Some(q) = self.quantile.get() {
            return Ok(*q);
        }
        let q = self.distribution.quantile(self.spec.alpha, &self.spec.mvt_settings)?;
        Ok(*self.quantile.get_or_init(|| q))
    }

    /// Single-step adjusted p-value of one contrast statistic.
    pub fn adjusted_p(&self, tstat: f64) -> f64 {
        let t = match self.spec.alternative {
            Alternative::Greater => tstat,
            Alternative::Less => -tstat,
            Alternative::TwoSided => tstat.abs(),
        };
        self.distribution.upper_tail(t)
    }

    pub fn fit(&self, sample: &GroupedSample) -> Result<FitSummary> {
        let fit = if self.spec.modified {
            fit_oneway(&modified_levene_transform(sample)?)?
        } else {
            fit_oneway(&levene_transform(sample))?
        };
        if fit.group_sizes != self.contrasts.group_sizes() {
            return Err(Error::Argument(format!(
                "procedure prepared for group sizes {:?}, sample has {:?}",
                self.contrasts.group_sizes(),
                fit.group_sizes
            )));
        }
        Ok(fit)
    }

    /// Contrast estimates with their adjusted p-values.
    pub fn estimates(&self, fit: &FitSummary) -> Result<Vec<(ContrastEstimate, f64)>> {
        (0..self.contrasts.num_rows())
            .map(|row| {
                let e = contrast_estimate(fit, &self.contrasts, row)?;
                Ok((e, self.adjusted_p(e.tstat)))
            })
            .collect()
    }

    pub fn evaluate(&self, sample: &GroupedSample) -> Result<TestReport> {
        let fit = self.fit(sample)?;
        let estimates = self.estimates(&fit)?;
        let quantile = self.quantile()?;
        let rows: Vec<ContrastRow> = estimates
            .into_iter()
            .zip(self.contrasts.row_labels())
            .map(|((e, adj_p), label)| {
                let (ci_low, ci_high) = ci_bounds(e.estimate, e.stderr, quantile, self.spec.alternative);
                ContrastRow {
                    label: label.clone(),
                    estimate: e.estimate,
                    stderr: e.stderr,
                    tstat: e.tstat,
                    adj_p,
                    ci_low,
                    ci_high,
                }
            })
            .collect();
        let global_min_p = rows.iter().map(|r| r.adj_p).fold(f64::INFINITY, f64::min);
        Ok(TestReport {
            rows,
            global_min_p,
            quantile_used: quantile,
            df: fit.df_resid,
            correlation: self.correlation.clone(),
            group_labels: sample.labels(),
            group_sizes: fit.group_sizes,
            pooled_sd: fit.pooled_sd,
            spec: self.spec,
        })
    }
}

/// Full Levene-Dunnett (or grand-mean) maxT test on one sample.
pub fn max_t_test(sample: &GroupedSample, spec: &TestSpec) -> Result<TestReport> {
    spec.validate()?;
    let sample = sample.control_first();
    MaxTProcedure::for_sample(&sample, spec)?.evaluate(&sample)
}

/// Simultaneous confidence bounds for every row of `m`.
pub fn simultaneous_ci(fit: &FitSummary, m: &ContrastMatrix, spec: &TestSpec) -> Result<Vec<(f64, f64)>> {
    spec.validate()?;
    let correlation = correlation_from_contrasts(m)?;
    let distribution =
        MaxTDistribution::sample(&correlation, fit.df_resid, spec.alternative.sides(), &spec.mvt_settings)?;
    let quantile = distribution.quantile(spec.alpha, &spec.mvt_settings)?;
    (0..m.num_rows())
        .map(|row| {
            let e = contrast_estimate(fit, m, row)?;
            Ok(ci_bounds(e.estimate, e.stderr, quantile, spec.alternative))
        })
        .collect()
}

/// Smallest adjusted p-value; the global test rejects at level alpha iff
/// this is at most alpha.
pub fn global_min_p(report: &TestReport) -> f64 {
    report.rows.iter().map(|r| r.adj_p).fold(f64::INFINITY, f64::min)
}
