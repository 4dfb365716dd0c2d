//! Many-to-one and grand-mean comparisons of group variances.
//!
//! Responses are Levene-transformed (absolute deviations from the group
//! median), fitted with a one-way model and compared through Dunnett-type or
//! grand-mean contrasts. Adjusted p-values and simultaneous confidence
//! intervals come from the joint multivariate t distribution of the contrast
//! statistics (single-step maxT). The [`simulate`] module estimates the
//! familywise error rate and power of the procedure by Monte Carlo.

pub mod anova;
pub mod cli;
pub mod contrasts;
pub mod dataset;
pub mod error;
pub mod inference;
pub mod mvt;
pub mod report;
pub mod simulate;
pub mod special;
pub mod transform;

pub use error::{Error, Result};

pub use contrasts::ContrastKind;
pub use dataset::GroupedSample;
pub use inference::{max_t_test, Alternative, TestReport, TestSpec};
pub use mvt::{MvtSettings, Sides};
pub use simulate::{run_power_grid, run_scenario, ScenarioSpec, SimResult};
