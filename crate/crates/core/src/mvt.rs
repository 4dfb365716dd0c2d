//! Central multivariate t equicoordinate probabilities and quantiles.
//!
//! The distribution of `max_j T_j` (or `max_j |T_j|`) for `T ~ t_k(R, df)` is
//! sampled once on a randomly shifted rank-1 (Richtmyer) lattice: coordinate 0
//! drives the chi divisor through the inverse incomplete gamma function and
//! coordinates `1..=k` become correlated normals through the Cholesky factor
//! of `R`. Each random shift forms one batch; the batch spread gives the error
//! estimate. Once sampled, the estimated CDF is a fixed monotone step function,
//! so probabilities at different points and the quantile search all share one
//! random stream.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::special::{inverse_gamma_lr, normal_quantile, t_quantile};

/// Number of independent random shifts of the lattice.
pub const BATCHES: usize = 10;

const PIVOT_TOL: f64 = 1e-10;
const UNIT_EPS: f64 = 1e-16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MvtSettings {
    pub sample_budget: usize,
    pub seed: u64,
    pub target_abs_error: f64,
    pub max_quantile_iters: usize,
}

impl Default for MvtSettings {
    fn default() -> Self {
        Self {
            sample_budget: 100_000,
            seed: 20_240_917,
            target_abs_error: 1e-3,
            max_quantile_iters: 100,
        }
    }
}

impl MvtSettings {
    pub fn with_seed(seed: u64) -> Self {
        Self {
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_budget < 1000 {
            return Err(Error::Argument(format!(
                "sample budget {} is below the minimum of 1000",
                self.sample_budget
            )));
        }
        if self.target_abs_error.is_nan() || self.target_abs_error <= 0.0 {
            return Err(Error::Argument("target_abs_error must be positive".into()));
        }
        if self.max_quantile_iters == 0 {
            return Err(Error::Argument("max_quantile_iters must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sides {
    /// `P(max T ≤ q)`
    OneSided,
    /// `P(max |T| ≤ q)`
    TwoSided,
}

/// Lower-triangular factor stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LowerTriangular {
    dim: usize,
    entries: Vec<f64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// `L · L^T`
    pub fn gram(&self) -> Vec<Vec<f64>> {
        let n = self.dim;
        (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (0..n).map(|m| self.get(i, m) * self.get(j, m)).sum())
                    .collect()
            })
            .collect()
    }

    fn mul_into(&self, z: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * self.dim..i * self.dim + i + 1];
            *o = row.iter().zip(z).map(|(l, z)| l * z).sum();
        }
    }
}

/// Cholesky factor of a positive semidefinite correlation matrix. Pivots
/// within `1e-10` of zero are treated as exact zeros and their columns are
/// zeroed, which handles rank-deficient matrices such as grand-mean
/// contrast correlations.
pub fn cholesky_factor(r: &CorrelationMatrix) -> Result<LowerTriangular> {
    let n = r.dim();
    let mut l = vec![0.0f64; n * n];
    for j in 0..n {
        let pivot = r.get(j, j) - (0..j).map(|m| l[j * n + m].powi(2)).sum::<f64>();
        if pivot < -PIVOT_TOL {
            return Err(Error::Numeric(format!(
                "correlation matrix is not positive semidefinite (pivot {j} = {pivot:e})"
            )));
        }
        if pivot <= PIVOT_TOL {
            continue;
        }
        let d = pivot.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let dot: f64 = (0..j).map(|m| l[i * n + m] * l[j * n + m]).sum();
            l[i * n + j] = (r.get(i, j) - dot) / d;
        }
    }
    Ok(LowerTriangular { dim: n, entries: l })
}

fn primes(count: usize) -> Vec<u64> {
    let mut found = Vec::with_capacity(count);
    let mut candidate = 2u64;
    while found.len() < count {
        if found.iter().take_while(|&&p| p * p <= candidate).all(|&p| !candidate.is_multiple_of(p)) {
            found.push(candidate);
        }
        candidate += 1;
    }
    found
}

/// Probability estimate with its 3-sigma batch error bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MvtProbability {
    pub prob: f64,
    pub est_error: f64,
}

/// Sampled null distribution of the maximum statistic.
#[derive(Debug, Clone)]
pub struct MaxTDistribution {
    sides: Sides,
    df: usize,
    dim: usize,
    /// Sorted maxima, one vector per random shift.
    batches: Vec<Vec<f64>>,
}

impl MaxTDistribution {
    pub fn sample(
        r: &CorrelationMatrix,
        df: usize,
        sides: Sides,
        settings: &MvtSettings,
    ) -> Result<Self> {
        settings.validate()?;
        if df == 0 {
            return Err(Error::Argument("degrees of freedom must be at least 1".into()));
        }
        let factor = cholesky_factor(r)?;
        let k = r.dim();
        let generator: Vec<f64> = primes(k + 1)
            .into_iter()
            .map(|p| (p as f64).sqrt().fract())
            .collect();
        let per_batch = settings.sample_budget / BATCHES;
        let half_df = df as f64 / 2.0;

        let batches = (0..BATCHES)
            .into_par_iter()
            .map(|b| {
                let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
                rng.set_stream(b as u64);
                let shift: Vec<f64> = (0..=k).map(|_| rng.random::<f64>()).collect();
                let mut normals = vec![0.0; k];
                let mut correlated = vec![0.0; k];
                let mut maxima: Vec<f64> = (1..=per_batch)
                    .map(|i| {
                        let unit = |j: usize| {
                            let x = (i as f64 * generator[j] + shift[j]).fract();
                            (1.0 - (2.0 * x - 1.0).abs()).clamp(UNIT_EPS, 1.0 - UNIT_EPS)
                        };
                        let chi = (2.0 * inverse_gamma_lr(half_df, unit(0)) / df as f64).sqrt();
                        for (j, z) in normals.iter_mut().enumerate() {
                            *z = normal_quantile(unit(j + 1));
                        }
                        factor.mul_into(&normals, &mut correlated);
                        let extreme = match sides {
                            Sides::OneSided => correlated.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                            Sides::TwoSided => correlated.iter().map(|x| x.abs()).fold(0.0, f64::max),
                        };
                        extreme / chi
                    })
                    .collect();
                maxima.sort_by(f64::total_cmp);
                maxima
            })
            .collect();

        Ok(Self {
            sides,
            df,
            dim: k,
            batches,
        })
    }

    pub fn sides(&self) -> Sides {
        self.sides
    }

    pub fn df(&self) -> usize {
        self.df
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn batch_probs(&self, q: f64) -> impl Iterator<Item = f64> + '_ {
        self.batches
            .iter()
            .map(move |b| b.partition_point(|&m| m <= q) as f64 / b.len() as f64)
    }

    /// Estimated `P(max ≤ q)`; nondecreasing in `q`.
    pub fn cdf(&self, q: f64) -> MvtProbability {
        let probs: Vec<f64> = self.batch_probs(q).collect();
        let n = probs.len() as f64;
        let mean = probs.iter().sum::<f64>() / n;
        let var = probs.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        MvtProbability {
            prob: mean,
            est_error: 3.0 * (var / n).sqrt(),
        }
    }

    /// Estimated `P(max > q)`, i.e. the single-step adjusted p-value of `q`.
    pub fn upper_tail(&self, q: f64) -> f64 {
        let n = self.batches.len() as f64;
        self.batch_probs(q).map(|p| 1.0 - p).sum::<f64>() / n
    }

    /// Smallest `q` with estimated `P(max ≤ q) ≥ 1 - alpha`, found by
    /// bracketing and bisection on the sampled CDF.
    pub fn quantile(&self, alpha: f64, settings: &MvtSettings) -> Result<f64> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Argument(format!("alpha {alpha} is outside (0, 1)")));
        }
        let target = 1.0 - alpha;
        let k = self.dim as f64;
        let (mut lo, mut hi) = match self.sides {
            Sides::OneSided => (
                t_quantile(1.0 - alpha, self.df),
                t_quantile(1.0 - alpha / k, self.df),
            ),
            Sides::TwoSided => (
                t_quantile(1.0 - alpha / 2.0, self.df),
                t_quantile(1.0 - alpha / (2.0 * k), self.df),
            ),
        };
        let below = |q: f64| self.cdf(q).prob < target;

        let mut iters = 0;
        let mut step = (hi - lo).max(0.1);
        while !below(lo) {
            lo -= step;
            step *= 2.0;
            iters += 1;
            if iters >= settings.max_quantile_iters {
                return Err(Error::Convergence("failed to bracket the quantile from below".into()));
            }
        }
        step = (hi - lo).max(0.1);
        while below(hi) {
            hi += step;
            step *= 2.0;
            iters += 1;
            if iters >= settings.max_quantile_iters {
                return Err(Error::Convergence("failed to bracket the quantile from above".into()));
            }
        }
        while hi - lo > 1e-10 * (1.0 + hi.abs()) {
            if iters >= settings.max_quantile_iters {
                return Err(Error::Convergence(format!(
                    "quantile bisection did not converge in {} iterations",
                    settings.max_quantile_iters
                )));
            }
            let mid = 0.5 * (lo + hi);
            if below(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
            iters += 1;
        }
        let reached = self.cdf(hi).prob;
        if (reached - target).abs() > settings.target_abs_error {
            return Err(Error::Convergence(format!(
                "estimated probability {reached} at the quantile misses {target} by more than {}",
                settings.target_abs_error
            )));
        }
        Ok(hi)
    }
}

/// `P(max T ≤ q)` (one-sided) or `P(max |T| ≤ q)` (two-sided).
pub fn mvt_prob(
    q: f64,
    r: &CorrelationMatrix,
    df: usize,
    sides: Sides,
    settings: &MvtSettings,
) -> Result<MvtProbability> {
    Ok(MaxTDistribution::sample(r, df, sides, settings)?.cdf(q))
}

pub fn equicoordinate_quantile(
    alpha: f64,
    r: &CorrelationMatrix,
    df: usize,
    sides: Sides,
    settings: &MvtSettings,
) -> Result<f64> {
    MaxTDistribution::sample(r, df, sides, settings)?.quantile(alpha, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::t_cdf;

    fn settings(budget: usize) -> MvtSettings {
        MvtSettings {
            sample_budget: budget,
            ..MvtSettings::default()
        }
    }

    #[test]
    fn cholesky_examples() {
        let l = cholesky_factor(&CorrelationMatrix::identity(3)).unwrap();
        assert_eq!(l.gram(), CorrelationMatrix::identity(3).to_rows());
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }

        let l = cholesky_factor(&CorrelationMatrix::equicorrelated(2, 0.5)).unwrap();
        assert_eq!(l.get(0, 0), 1.0);
        assert_eq!(l.get(1, 0), 0.5);
        assert!((l.get(1, 1) - 0.75f64.sqrt()).abs() < 1e-15);

        let l = cholesky_factor(&CorrelationMatrix::equicorrelated(2, 1.0)).unwrap();
        assert_eq!((l.get(0, 0), l.get(1, 0), l.get(1, 1)), (1.0, 1.0, 0.0));
    }

    #[test]
    fn cholesky_reconstructs_rank_deficient() {
        let m = crate::contrasts::grand_mean_matrix(&[13, 17, 17, 6, 11]).unwrap();
        let r = crate::contrasts::correlation_from_contrasts(&m).unwrap();
        let l = cholesky_factor(&r).unwrap();
        let g = l.gram();
        for i in 0..5 {
            for j in 0..5 {
                assert!((g[i][j] - r.get(i, j)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn indefinite_matrix_rejected() {
        let r = CorrelationMatrix::new(vec![
            vec![1.0, 0.9, -0.9],
            vec![0.9, 1.0, 0.9],
            vec![-0.9, 0.9, 1.0],
        ])
        .unwrap();
        assert!(matches!(cholesky_factor(&r), Err(Error::Numeric(_))));
        assert!(matches!(
            mvt_prob(1.0, &r, 5, Sides::OneSided, &settings(2000)),
            Err(Error::Numeric(_))
        ));
    }

    #[test]
    fn settings_validation() {
        assert!(settings(999).validate().is_err());
        let bad = MvtSettings { target_abs_error: 0.0, ..MvtSettings::default() };
        assert!(bad.validate().is_err());
        assert!(MvtSettings::default().validate().is_ok());
    }

    #[test]
    fn univariate_probability() {
        let q = t_quantile(0.95, 7);
        let p = mvt_prob(q, &CorrelationMatrix::identity(1), 7, Sides::OneSided, &settings(20_000)).unwrap();
        assert!((p.prob - 0.95).abs() < 2e-3, "{p:?}");
        let p2 = mvt_prob(q, &CorrelationMatrix::identity(1), 7, Sides::TwoSided, &settings(20_000)).unwrap();
        assert!((p2.prob - 0.90).abs() < 2e-3, "{p2:?}");
    }

    #[test]
    fn perfect_correlation_collapses() {
        let s = settings(20_000);
        let one = MaxTDistribution::sample(&CorrelationMatrix::identity(1), 12, Sides::OneSided, &s).unwrap();
        let two = MaxTDistribution::sample(&CorrelationMatrix::equicorrelated(2, 1.0), 12, Sides::OneSided, &s).unwrap();
        for q in [-1.0, 0.0, 0.7, 1.5, 2.5] {
            let exact = t_cdf(q, 12);
            assert!((one.cdf(q).prob - exact).abs() < 2e-3);
            assert!((two.cdf(q).prob - one.cdf(q).prob).abs() < 1e-12);
        }
    }

    #[test]
    fn cdf_monotone_and_sides_ordered() {
        let s = settings(10_000);
        let r = CorrelationMatrix::equicorrelated(3, 0.5);
        let one = MaxTDistribution::sample(&r, 20, Sides::OneSided, &s).unwrap();
        let two = MaxTDistribution::sample(&r, 20, Sides::TwoSided, &s).unwrap();
        let mut last = 0.0;
        for i in 0..200 {
            let q = -3.0 + i as f64 * 0.035;
            let p = one.cdf(q).prob;
            assert!(p >= last);
            last = p;
            assert!(two.cdf(q).prob <= p);
            assert!((one.upper_tail(q) - (1.0 - p)).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let r = CorrelationMatrix::equicorrelated(3, 0.5);
        let s = settings(5000);
        let a = equicoordinate_quantile(0.05, &r, 15, Sides::TwoSided, &s).unwrap();
        let b = equicoordinate_quantile(0.05, &r, 15, Sides::TwoSided, &s).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let other = MvtSettings { seed: 99, ..s };
        let c = equicoordinate_quantile(0.05, &r, 15, Sides::TwoSided, &other).unwrap();
        assert_ne!(a.to_bits(), c.to_bits());
        assert!((a - c).abs() < 0.05);
    }

    #[test]
    fn quantile_monotone_in_alpha() {
        let r = CorrelationMatrix::equicorrelated(3, 0.5);
        let s = settings(10_000);
        let d = MaxTDistribution::sample(&r, 30, Sides::OneSided, &s).unwrap();
        let q05 = d.quantile(0.05, &s).unwrap();
        let q50 = d.quantile(0.5, &s).unwrap();
        let q01 = d.quantile(0.01, &s).unwrap();
        assert!(q50 < q05 && q05 < q01);
        assert!(d.quantile(0.0, &s).is_err());
    }
}
