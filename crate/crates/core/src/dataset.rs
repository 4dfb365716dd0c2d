//! Grouped one-way layouts and their CSV ingestion.
//!
//! A [`GroupedSample`] holds `k + 1` labelled groups of responses, one of
//! which is the control. Files are plain comma-separated text with a header
//! row; the response and grouping columns are selected by name.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub label: String,
    pub values: Vec<f64>,
}

/// Responses partitioned by treatment level, control level identified.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedSample {
    groups: Vec<Group>,
    control_index: usize,
}

impl GroupedSample {
    /// Validates and builds a sample. Needs at least two nonempty groups with
    /// unique labels and finite values.
    pub fn new(groups: Vec<Group>, control_index: usize) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::Argument(format!(
                "need at least 2 groups, got {}",
                groups.len()
            )));
        }
        if control_index >= groups.len() {
            return Err(Error::Argument(format!(
                "control index {control_index} out of range for {} groups",
                groups.len()
            )));
        }
        let mut seen = HashMap::new();
        for (i, g) in groups.iter().enumerate() {
            if g.values.is_empty() {
                return Err(Error::Argument(format!("group '{}' is empty", g.label)));
            }
            if let Some(v) = g.values.iter().find(|v| !v.is_finite()) {
                return Err(Error::Argument(format!(
                    "group '{}' contains non-finite value {v}",
                    g.label
                )));
            }
            if seen.insert(g.label.as_str(), i).is_some() {
                return Err(Error::Argument(format!("duplicate group label '{}'", g.label)));
            }
        }
        Ok(Self {
            groups,
            control_index,
        })
    }

    /// Convenience constructor from `(label, values)` pairs with the control first.
    pub fn from_pairs<L: Into<String>>(pairs: Vec<(L, Vec<f64>)>) -> Result<Self> {
        let groups = pairs
            .into_iter()
            .map(|(label, values)| Group {
                label: label.into(),
                values,
            })
            .collect();
        Self::new(groups, 0)
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    pub fn control_index(&self) -> usize {
        self.control_index
    }

    pub fn num_groups(&self) -> usize {
        self.groups.len()
    }

    pub fn labels(&self) -> Vec<String> {
        self.groups.iter().map(|g| g.label.clone()).collect()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.values.len()).collect()
    }

    pub fn total_len(&self) -> usize {
        self.groups.iter().map(|g| g.values.len()).sum()
    }

    /// Returns a copy with the control group moved to position 0, the other
    /// groups keeping their relative order.
    pub fn control_first(&self) -> GroupedSample {
        if self.control_index == 0 {
            return self.clone();
        }
        let mut groups = Vec::with_capacity(self.groups.len());
        groups.push(self.groups[self.control_index].clone());
        groups.extend(
            self.groups
                .iter()
                .enumerate()
                .filter(|(i, _)| *i != self.control_index)
                .map(|(_, g)| g.clone()),
        );
        GroupedSample {
            groups,
            control_index: 0,
        }
    }
}

/// Reads a grouped sample from a CSV file.
///
/// Groups appear in order of first appearance. When `control_label` is given
/// that group is moved to the front and becomes the control.
pub fn load_csv(
    path: impl AsRef<Path>,
    response_col: &str,
    group_col: &str,
    control_label: Option<&str>,
) -> Result<GroupedSample> {
    let file = std::fs::File::open(path.as_ref())?;
    read_csv(file, response_col, group_col, control_label)
}

/// Same as [`load_csv`] over any reader.
pub fn read_csv<R: Read>(
    reader: R,
    response_col: &str,
    group_col: &str,
    control_label: Option<&str>,
) -> Result<GroupedSample> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::Schema(format!("cannot read header: {e}")))?
        .clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Schema(format!("missing column '{name}'")))
    };
    let response_idx = column(response_col)?;
    let group_idx = column(group_col)?;

    let mut order: Vec<Group> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    for (i, record) in rdr.records().enumerate() {
        // header is row 1
        let row = i + 2;
        let record = record.map_err(|e| Error::Parse {
            row,
            message: e.to_string(),
        })?;
        let field = |idx: usize| {
            record.get(idx).ok_or_else(|| Error::Parse {
                row,
                message: "too few fields".into(),
            })
        };
        let raw = field(response_idx)?;
        let value: f64 = raw.parse().map_err(|_| Error::Parse {
            row,
            message: format!("response value '{raw}' is not a number"),
        })?;
        if !value.is_finite() {
            return Err(Error::Parse {
                row,
                message: format!("response value '{raw}' is not finite"),
            });
        }
        let label = field(group_idx)?;
        let slot = match index.get(label) {
            Some(&j) => j,
            None => {
                index.insert(label.to_string(), order.len());
                order.push(Group {
                    label: label.to_string(),
                    values: Vec::new(),
                });
                order.len() - 1
            }
        };
        order[slot].values.push(value);
    }

    let control_index = match control_label {
        Some(c) => *index
            .get(c)
            .ok_or_else(|| Error::Argument(format!("unknown control label '{c}'")))?,
        None => 0,
    };
    Ok(GroupedSample::new(order, control_index)?.control_first())
}

/// Per-group descriptive summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub median: f64,
    /// Unbiased sample variance; `None` for singleton groups.
    pub variance: Option<f64>,
}

pub fn summarize_groups(sample: &GroupedSample) -> Vec<GroupSummary> {
    sample
        .groups()
        .iter()
        .map(|g| {
            let n = g.values.len();
            let variance = (n > 1).then(|| {
                let mean = g.values.iter().sum::<f64>() / n as f64;
                g.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64
            });
            GroupSummary {
                label: g.label.clone(),
                n,
                median: crate::transform::group_median(&g.values)
                    .expect("groups are nonempty by construction"),
                variance,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn csv(text: &str, control: Option<&str>) -> Result<GroupedSample> {
        read_csv(text.as_bytes(), "y", "g", control)
    }

    #[test]
    fn groups_follow_first_appearance() {
        let s = csv("y,g\n1,b\n2,a\n3,b\n4,c\n", None).unwrap();
        assert_eq!(s.labels(), vec!["b", "a", "c"]);
        assert_eq!(s.groups()[0].values, vec![1.0, 3.0]);
        assert_eq!(s.control_index(), 0);
    }

    #[test]
    fn control_label_moves_group_to_front() {
        let s = csv("y,g\n1,b\n2,a\n3,b\n4,c\n", Some("c")).unwrap();
        assert_eq!(s.labels(), vec!["c", "b", "a"]);
        assert_eq!(s.total_len(), 4);
    }

    #[test]
    fn two_singleton_groups() {
        let s = csv("y,g\n1.5,A\n2.5,B\n", None).unwrap();
        assert_eq!(s.sizes(), vec![1, 1]);
    }

    #[test]
    fn na_is_a_parse_error_with_row() {
        match csv("y,g\n1,A\nNA,B\n", None) {
            Err(Error::Parse { row, message }) => {
                assert_eq!(row, 3);
                assert!(message.contains("NA"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn missing_column_is_schema_error() {
        assert!(matches!(
            read_csv("x,g\n1,A\n".as_bytes(), "y", "g", None),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn unknown_control_is_argument_error() {
        let err = csv("y,g\n1,A\n2,B\n", Some("999")).unwrap_err();
        assert!(matches!(err, Error::Argument(ref m) if m.contains("unknown control label")));
    }

    #[test]
    fn single_group_rejected() {
        assert!(csv("y,g\n1,A\n2,A\n", None).is_err());
    }

    #[test]
    fn validation_rules() {
        assert!(GroupedSample::from_pairs(vec![("a", vec![1.0]), ("a", vec![2.0])]).is_err());
        assert!(GroupedSample::from_pairs(vec![("a", vec![1.0]), ("b", vec![])]).is_err());
        assert!(GroupedSample::from_pairs(vec![("a", vec![f64::NAN]), ("b", vec![1.0])]).is_err());
        assert!(GroupedSample::new(
            vec![
                Group { label: "a".into(), values: vec![1.0] },
                Group { label: "b".into(), values: vec![1.0] },
            ],
            2
        )
        .is_err());
    }

    #[test]
    fn summary_examples() {
        let s = GroupedSample::from_pairs(vec![("A", vec![1.0, 2.0, 3.0]), ("B", vec![5.0])]).unwrap();
        let rows = summarize_groups(&s);
        assert_eq!(
            rows[0],
            GroupSummary { label: "A".into(), n: 3, median: 2.0, variance: Some(1.0) }
        );
        assert_eq!(
            rows[1],
            GroupSummary { label: "B".into(), n: 1, median: 5.0, variance: None }
        );
    }
}
