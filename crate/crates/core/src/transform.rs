//! Levene transformation: absolute deviations from the group median, with an
//! optional trimmed variant that drops the structural zero of odd-sized groups.

use crate::dataset::GroupedSample;
use crate::error::{Error, Result};

/// Median with the midpoint convention for even sizes.
pub fn group_median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::Argument("median of an empty list".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TransformedGroup {
    pub label: String,
    /// Absolute deviations from the group median, in input order.
    pub values: Vec<f64>,
    /// Observations removed by trimming (0 or 1).
    pub trimmed: usize,
}

#[derive(Debug, Clone)]
pub struct TransformedSample<'a> {
    groups: Vec<TransformedGroup>,
    origin: &'a GroupedSample,
}

impl<'a> TransformedSample<'a> {
    pub fn groups(&self) -> &[TransformedGroup] {
        &self.groups
    }

    pub fn origin(&self) -> &'a GroupedSample {
        self.origin
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.values.len()).collect()
    }

    pub fn trimmed_counts(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.trimmed).collect()
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }
}

fn abs_deviations(values: &[f64]) -> Vec<f64> {
    let median = group_median(values).expect("groups are nonempty by construction");
    values.iter().map(|v| (v - median).abs()).collect()
}

pub fn levene_transform(sample: &GroupedSample) -> TransformedSample<'_> {
    let groups = sample
        .groups()
        .iter()
        .map(|g| TransformedGroup {
            label: g.label.clone(),
            values: abs_deviations(&g.values),
            trimmed: 0,
        })
        .collect();
    TransformedSample {
        groups,
        origin: sample,
    }
}

/// Levene transform followed by removal of exactly one zero deviation from
/// every odd-sized group. Even-sized groups are left untouched.
///
/// For odd `n` the median is one of the observations, so its deviation is an
/// exact zero; ties may produce more zeros but only one is removed.
pub fn modified_levene_transform(sample: &GroupedSample) -> Result<TransformedSample<'_>> {
    let mut transformed = levene_transform(sample);
    for group in &mut transformed.groups {
        let n = group.values.len();
        if n % 2 == 0 {
            continue;
        }
        if n == 1 {
            return Err(Error::DegenerateGroup(group.label.clone()));
        }
        let zero = group
            .values
            .iter()
            .position(|&z| z == 0.0)
            .expect("odd-sized group always contains its median");
        group.values.remove(zero);
        group.trimmed = 1;
    }
    Ok(transformed)
}
