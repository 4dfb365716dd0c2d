//! Many-to-one (Dunnett) and grand-mean contrast matrices, and the
//! correlation structure they induce on the contrast t statistics.

use serde::{Deserialize, Serialize, Serializer};

use crate::error::{Error, Result};

const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContrastKind {
    /// Each treatment against the control in column 0.
    Dunnett,
    /// Each group against the sample-size weighted mean of all groups.
    GrandMean,
}

/// `k` contrast rows over `k + 1` group means.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastMatrix {
    coefficients: Vec<Vec<f64>>,
    row_labels: Vec<String>,
    group_sizes: Vec<usize>,
}

impl ContrastMatrix {
    /// Builds an arbitrary contrast matrix. Rows must sum to zero, be nonzero
    /// and have one coefficient per group.
    pub fn new(
        coefficients: Vec<Vec<f64>>,
        row_labels: Vec<String>,
        group_sizes: Vec<usize>,
    ) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::Argument("contrast matrix has no rows".into()));
        }
        if row_labels.len() != coefficients.len() {
            return Err(Error::Argument(format!(
                "{} row labels for {} rows",
                row_labels.len(),
                coefficients.len()
            )));
        }
        if group_sizes.contains(&0) {
            return Err(Error::Argument("group sizes must be positive".into()));
        }
        for (row, label) in coefficients.iter().zip(&row_labels) {
            if row.len() != group_sizes.len() {
                return Err(Error::Argument(format!(
                    "row '{label}' has {} coefficients for {} groups",
                    row.len(),
                    group_sizes.len()
                )));
            }
            if row.iter().all(|&c| c == 0.0) {
                return Err(Error::Argument(format!("row '{label}' is all zero")));
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > ROW_SUM_TOL {
                return Err(Error::Argument(format!(
                    "row '{label}' sums to {sum}, not 0"
                )));
            }
        }
        Ok(Self {
            coefficients,
            row_labels,
            group_sizes,
        })
    }

    /// Builds the matrix of the given kind. `group_names`, when present, are
    /// used for the row labels; otherwise groups are called `T0, T1, ...`.
    pub fn build(
        kind: ContrastKind,
        group_sizes: &[usize],
        group_names: Option<&[String]>,
    ) -> Result<Self> {
        let matrix = match kind {
            ContrastKind::Dunnett => dunnett_matrix(group_sizes)?,
            ContrastKind::GrandMean => grand_mean_matrix(group_sizes)?,
        };
        match group_names {
            Some(names) => matrix.relabel(kind, names),
            None => Ok(matrix),
        }
    }

    fn relabel(mut self, kind: ContrastKind, names: &[String]) -> Result<Self> {
        if names.len() != self.group_sizes.len() {
            return Err(Error::Argument(format!(
                "{} group names for {} groups",
                names.len(),
                self.group_sizes.len()
            )));
        }
        self.row_labels = match kind {
            ContrastKind::Dunnett => names[1..]
                .iter()
                .map(|n| format!("{n} - {}", names[0]))
                .collect(),
            ContrastKind::GrandMean => names.iter().map(|n| format!("{n} - mean")).collect(),
        };
        Ok(self)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.coefficients
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.coefficients[i]
    }

    pub fn num_rows(&self) -> usize {
        self.coefficients.len()
    }

    pub fn num_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    /// `Σ c_i² / n_i` for one row.
    pub fn variance_factor(&self, row: usize) -> f64 {
        self.cross_factor(row, row)
    }

    fn cross_factor(&self, a: usize, b: usize) -> f64 {
        self.coefficients[a]
            .iter()
            .zip(&self.coefficients[b])
            .zip(&self.group_sizes)
            .map(|((x, y), &n)| x * y / n as f64)
            .sum()
    }
}

fn check_sizes(group_sizes: &[usize]) -> Result<()> {
    if group_sizes.len() < 2 {
        return Err(Error::Argument(format!(
            "contrasts need at least 2 groups, got {}",
            group_sizes.len()
        )));
    }
    if group_sizes.contains(&0) {
        return Err(Error::Argument("group sizes must be positive".into()));
    }
    Ok(())
}

/// Treatment-versus-control rows, `T1 - T0` first.
pub fn dunnett_matrix(group_sizes: &[usize]) -> Result<ContrastMatrix> {
    check_sizes(group_sizes)?;
    let groups = group_sizes.len();
    let coefficients = (1..groups)
        .map(|j| {
            let mut row = vec![0.0; groups];
            row[0] = -1.0;
            row[j] = 1.0;
            row
        })
        .collect();
    let labels = (1..groups).map(|j| format!("T{j} - T0")).collect();
    ContrastMatrix::new(coefficients, labels, group_sizes.to_vec())
}

/// One row per group: `c_ii = 1 - n_i/N`, `c_ij = -n_j/N`.
pub fn grand_mean_matrix(group_sizes: &[usize]) -> Result<ContrastMatrix> {
    check_sizes(group_sizes)?;
    let total: usize = group_sizes.iter().sum();
    let weights: Vec<f64> = group_sizes
        .iter()
        .map(|&n| n as f64 / total as f64)
        .collect();
    let coefficients = (0..group_sizes.len())
        .map(|i| {
            weights
                .iter()
                .enumerate()
                .map(|(j, w)| if i == j { 1.0 - w } else { -w })
                .collect()
        })
        .collect();
    let labels = (0..group_sizes.len()).map(|i| format!("T{i} - mean")).collect();
    ContrastMatrix::new(coefficients, labels, group_sizes.to_vec())
}

/// Symmetric `k × k` correlation matrix, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

const CORR_TOL: f64 = 1e-12;

impl CorrelationMatrix {
    /// Checks unit diagonal, symmetry and `|r| ≤ 1`. Positive
    /// semidefiniteness is only verified when the matrix is factorized.
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::Argument("empty correlation matrix".into()));
        }
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Argument("correlation matrix is not square".into()));
        }
        for i in 0..dim {
            if (rows[i][i] - 1.0).abs() > CORR_TOL {
                return Err(Error::Argument(format!("diagonal entry {i} is {}", rows[i][i])));
            }
            for j in 0..dim {
                let r = rows[i][j];
                if !r.is_finite() || r.abs() > 1.0 + CORR_TOL {
                    return Err(Error::Argument(format!("entry ({i},{j}) = {r} out of range")));
                }
                if (r - rows[j][i]).abs() > CORR_TOL {
                    return Err(Error::Argument("correlation matrix is not symmetric".into()));
                }
            }
        }
        Ok(Self {
            dim,
            entries: rows.into_iter().flatten().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::equicorrelated(dim, 0.0)
    }

    pub fn equicorrelated(dim: usize, rho: f64) -> Self {
        let entries = (0..dim * dim)
            .map(|i| if i / dim == i % dim { 1.0 } else { rho })
            .collect();
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim).map(<[f64]>::to_vec).collect()
    }

    /// Leading `k × k` principal submatrix.
    pub fn leading(&self, k: usize) -> Result<Self> {
        if k == 0 || k > self.dim {
            return Err(Error::Argument(format!(
                "leading block of size {k} from a {}x{} matrix",
                self.dim, self.dim
            )));
        }
        let entries = (0..k)
            .flat_map(|i| (0..k).map(move |j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        Ok(Self { dim: k, entries })
    }
}

impl Serialize for CorrelationMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_rows().serialize(serializer)
    }
}

/// Correlation of the contrast estimates under homoscedastic errors:
/// `R_ab = Σ c_a c_b / n  /  sqrt(Σ c_a²/n · Σ c_b²/n)`.
pub fn correlation_from_contrasts(m: &ContrastMatrix) -> Result<CorrelationMatrix> {
    let k = m.num_rows();
    let scale: Vec<f64> = (0..k).map(|a| m.variance_factor(a).sqrt()).collect();
    if let Some(a) = scale.iter().position(|&s| s == 0.0) {
        return Err(Error::Argument(format!(
            "row '{}' has zero variance",
            m.row_labels()[a]
        )));
    }
    let mut entries = vec![0.0; k * k];
    for a in 0..k {
        entries[a * k + a] = 1.0;
        for b in 0..a {
            let r = (m.cross_factor(a, b) / (scale[a] * scale[b])).clamp(-1.0, 1.0);
            entries[a * k + b] = r;
            entries[b * k + a] = r;
        }
    }
    Ok(CorrelationMatrix { dim: k, entries })
}
