//! Monte Carlo estimation of familywise error rate and power.
//!
//! Every replication draws its data from its own ChaCha substream, indexed by
//! replication number, so serial and parallel runs give identical counts.
//! The null distribution of the maximum statistic depends only on the design,
//! so it is sampled once per scenario and shared by all replications.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::contrasts::ContrastKind;
use crate::dataset::{Group, GroupedSample};
use crate::error::{Error, Result};
use crate::inference::{Alternative, MaxTProcedure, TestSpec};
use crate::mvt::MvtSettings;

/// Default ratio between an elevated and a baseline standard deviation.
pub const DEFAULT_ELEVATION: f64 = 3.0;

fn default_alpha() -> f64 {
    0.05
}

fn default_replications() -> usize {
    10_000
}

fn default_seed() -> u64 {
    1
}

fn default_alternative() -> Alternative {
    Alternative::Greater
}

fn default_kind() -> ContrastKind {
    ContrastKind::Dunnett
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub group_sizes: Vec<usize>,
    pub group_sds: Vec<f64>,
    #[serde(default = "default_alternative")]
    pub alternative: Alternative,
    #[serde(default)]
    pub modified: bool,
    #[serde(default = "default_kind")]
    pub contrast_kind: ContrastKind,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub mvt_settings: MvtSettings,
}

impl ScenarioSpec {
    /// Null scenario with unit standard deviations and default options.
    pub fn null(group_sizes: Vec<usize>) -> Self {
        let group_sds = vec![1.0; group_sizes.len()];
        Self {
            group_sizes,
            group_sds,
            alternative: default_alternative(),
            modified: false,
            contrast_kind: default_kind(),
            alpha: default_alpha(),
            replications: default_replications(),
            seed: default_seed(),
            mvt_settings: MvtSettings::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.group_sizes.len() < 2 {
            return Err(Error::Argument("a scenario needs at least 2 groups".into()));
        }
        if self.group_sizes.len() != self.group_sds.len() {
            return Err(Error::Argument(format!(
                "{} group sizes but {} standard deviations",
                self.group_sizes.len(),
                self.group_sds.len()
            )));
        }
        if self.group_sizes.contains(&0) {
            return Err(Error::Argument("group sizes must be positive".into()));
        }
        if self.group_sds.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return Err(Error::Argument("standard deviations must be positive and finite".into()));
        }
        if self.replications == 0 {
            return Err(Error::Argument("replications must be at least 1".into()));
        }
        if !(0.0..1.0).contains(&self.alpha) {
            return Err(Error::Argument(format!("alpha {} is outside [0, 1)", self.alpha)));
        }
        self.mvt_settings.validate()
    }

    fn test_spec(&self) -> TestSpec {
        TestSpec {
            contrast_kind: self.contrast_kind,
            alternative: self.alternative,
            modified: self.modified,
            alpha: self.alpha,
            mvt_settings: self.mvt_settings,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// Share of replications with global min-p at or below alpha.
    pub global_rejection_rate: f64,
    pub per_contrast_rejection_rates: Vec<f64>,
    pub replications_used: usize,
    /// Replications whose fit was degenerate; excluded from the rates.
    pub error_replications: usize,
}

/// `groups` standard deviations of 1 with the listed groups raised to `ratio`.
pub fn elevated_pattern(groups: usize, elevated: &[usize], ratio: f64) -> Vec<f64> {
    (0..groups)
        .map(|g| if elevated.contains(&g) { ratio } else { 1.0 })
        .collect()
}

fn replication_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Default)]
struct Tally {
    global: u64,
    per_contrast: Vec<u64>,
    used: u64,
    errors: u64,
}

impl Tally {
    fn merge(mut self, other: Tally) -> Tally {
        if self.per_contrast.len() < other.per_contrast.len() {
            self.per_contrast.resize(other.per_contrast.len(), 0);
        }
        for (a, b) in self.per_contrast.iter_mut().zip(&other.per_contrast) {
            *a += b;
        }
        self.global += other.global;
        self.used += other.used;
        self.errors += other.errors;
        self
    }
}

fn run_with_streams(spec: &ScenarioSpec, stream_base: u64) -> Result<SimResult> {
    spec.validate()?;
    let labels: Vec<String> = (0..spec.group_sizes.len()).map(|i| format!("T{i}")).collect();
    let template = GroupedSample::new(
        spec.group_sizes
            .iter()
            .zip(&labels)
            .map(|(&n, label)| Group {
                label: label.clone(),
                values: vec![0.0; n],
            })
            .collect(),
        0,
    )?;
    let procedure = MaxTProcedure::for_sample(&template, &spec.test_spec())?;
    let rows = procedure.contrasts().num_rows();
    let alpha = spec.alpha;

    let tally = (0..spec.replications as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = replication_rng(spec.seed, stream_base + r);
            let groups = template
                .groups()
                .iter()
                .zip(&spec.group_sds)
                .map(|(g, &sd)| Group {
                    label: g.label.clone(),
                    values: (0..g.values.len())
                        .map(|_| sd * rng.sample::<f64, _>(StandardNormal))
                        .collect(),
                })
                .collect();
            let mut tally = Tally {
                per_contrast: vec![0; rows],
                ..Tally::default()
            };
            let outcome = GroupedSample::new(groups, 0)
                .and_then(|s| procedure.fit(&s))
                .and_then(|fit| procedure.estimates(&fit));
            match outcome {
                Ok(estimates) => {
                    tally.used = 1;
                    // a level-0 test never rejects
                    let mut any = false;
                    for (slot, (_, p)) in tally.per_contrast.iter_mut().zip(&estimates) {
                        if alpha > 0.0 && *p <= alpha {
                            *slot = 1;
                            any = true;
                        }
                    }
                    tally.global = any as u64;
                }
                Err(_) => tally.errors = 1,
            }
            tally
        })
        .reduce(Tally::default, Tally::merge);

    let used = tally.used as f64;
    let rate = |count: u64| if tally.used == 0 { 0.0 } else { count as f64 / used };
    let mut per_contrast = tally.per_contrast;
    per_contrast.resize(rows, 0);
    Ok(SimResult {
        global_rejection_rate: rate(tally.global),
        per_contrast_rejection_rates: per_contrast.into_iter().map(rate).collect(),
        replications_used: tally.used as usize,
        error_replications: tally.errors as usize,
    })
}

/// Estimates global and per-contrast rejection rates for one scenario.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<SimResult> {
    run_with_streams(spec, 0)
}

/// One scenario per standard-deviation pattern, each on its own block of
/// substreams. Results keep the order of `sd_patterns`.
pub fn run_power_grid(base: &ScenarioSpec, sd_patterns: &[Vec<f64>]) -> Result<Vec<(Vec<f64>, SimResult)>> {
    if let Some(bad) = sd_patterns.iter().find(|p| p.len() != base.group_sizes.len()) {
        return Err(Error::Argument(format!(
            "pattern {bad:?} does not match {} groups",
            base.group_sizes.len()
        )));
    }
    sd_patterns
        .iter()
        .enumerate()
        .map(|(i, pattern)| {
            let spec = ScenarioSpec {
                group_sds: pattern.clone(),
                ..base.clone()
            };
            Ok((pattern.clone(), run_with_streams(&spec, (i as u64) << 32)?))
        })
        .collect()
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(T::to_string).collect::<Vec<_>>().join(" ")
}

/// CSV header for simulation rows with `contrasts` per-contrast columns.
pub fn csv_header(contrasts: usize) -> String {
    let mut h = String::from("sizes,sds,modified,global");
    for c in 1..=contrasts {
        let _ = write!(h, ",c{c}");
    }
    h.push_str(",replications,errors");
    h
}

/// One CSV row in the layout of [`csv_header`].
pub fn csv_row(spec: &ScenarioSpec, result: &SimResult) -> String {
    let mut row = format!(
        "{},{},{},{}",
        join(&spec.group_sizes),
        join(&spec.group_sds),
        spec.modified,
        result.global_rejection_rate
    );
    for r in &result.per_contrast_rejection_rates {
        let _ = write!(row, ",{r}");
    }
    let _ = write!(row, ",{},{}", result.replications_used, result.error_replications);
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(sizes: Vec<usize>, reps: usize) -> ScenarioSpec {
        ScenarioSpec {
            replications: reps,
            mvt_settings: MvtSettings {
                sample_budget: 10_000,
                ..MvtSettings::default()
            },
            ..ScenarioSpec::null(sizes)
        }
    }

    #[test]
    fn level_zero_never_rejects() {
        let spec = ScenarioSpec { alpha: 0.0, ..quick(vec![5, 5, 5], 300) };
        let r = run_scenario(&spec).unwrap();
        assert_eq!(r.global_rejection_rate, 0.0);
        assert!(r.per_contrast_rejection_rates.iter().all(|&x| x == 0.0));
        assert_eq!(r.replications_used + r.error_replications, 300);
    }

    #[test]
    fn rates_are_consistent() {
        let spec = ScenarioSpec {
            group_sds: vec![1.0, 1.0, 4.0],
            ..quick(vec![8, 8, 8], 400)
        };
        let r = run_scenario(&spec).unwrap();
        assert_eq!(r.per_contrast_rejection_rates.len(), 2);
        for &rate in &r.per_contrast_rejection_rates {
            assert!((0.0..=1.0).contains(&rate));
            assert!(rate <= r.global_rejection_rate + 1e-12);
        }
        assert!(r.per_contrast_rejection_rates[1] > 0.5);
    }

    #[test]
    fn reproducible() {
        let spec = quick(vec![4, 4, 4], 200);
        assert_eq!(run_scenario(&spec).unwrap(), run_scenario(&spec).unwrap());
    }

    #[test]
    fn validation() {
        assert!(run_scenario(&ScenarioSpec { replications: 0, ..quick(vec![4, 4], 1) }).is_err());
        assert!(run_scenario(&ScenarioSpec { group_sds: vec![1.0], ..quick(vec![4, 4], 1) }).is_err());
        assert!(run_scenario(&ScenarioSpec { group_sds: vec![1.0, -1.0], ..quick(vec![4, 4], 1) }).is_err());
        assert!(run_power_grid(&quick(vec![4, 4], 1), &[vec![1.0]]).is_err());
    }

    #[test]
    fn grid_keeps_order_and_uses_distinct_streams() {
        let base = quick(vec![6, 6, 6], 200);
        let patterns = vec![vec![1.0, 1.0, 1.0], vec![1.0, 1.0, 1.0], vec![1.0, 3.0, 1.0]];
        let grid = run_power_grid(&base, &patterns).unwrap();
        assert_eq!(grid.len(), 3);
        assert_eq!(grid[2].0, patterns[2]);
        assert_eq!(grid[0].1, run_scenario(&base).unwrap());
        assert_ne!(grid[0].1, grid[1].1);
    }

    #[test]
    fn elevation_pattern() {
        assert_eq!(elevated_pattern(4, &[0, 3], 3.0), vec![3.0, 1.0, 1.0, 3.0]);
    }

    #[test]
    fn scenario_json_defaults() {
        let spec: ScenarioSpec =
            serde_json::from_str(r#"{"group_sizes":[10,10],"group_sds":[1,2]}"#).unwrap();
        assert_eq!(spec.replications, 10_000);
        assert_eq!(spec.alternative, Alternative::Greater);
        assert_eq!(spec.alpha, 0.05);
    }

    #[test]
    fn csv_layout() {
        let spec = quick(vec![3, 3, 3], 10);
        let result = SimResult {
            global_rejection_rate: 0.5,
            per_contrast_rejection_rates: vec![0.25, 0.5],
            replications_used: 10,
            error_replications: 0,
        };
        assert_eq!(csv_header(2), "sizes,sds,modified,global,c1,c2,replications,errors");
        assert_eq!(csv_row(&spec, &result), "3 3 3,1 1 1,false,0.5,0.25,0.5,10,0");
    }
}
