//! Machine-readable reports. Serialization is deterministic (struct field
//! order, no maps), so identical configs and seeds produce byte-identical
//! JSON except for the wall-clock field.

use serde::{Deserialize, Serialize};

use chainverifier_core::{
    DensityCheck, PathCertificate, RateEstimate, StabilityVerdict, Trajectory,
};

use crate::config::{PathQuery, RunConfig};

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Report of the `analyze` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerdictReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub verdict: StabilityVerdict,
    pub wall_clock_ms: u64,
}

/// Per-state outcome of a density check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityCheckOutcome {
    pub state: Vec<f64>,
    pub l1_threshold: f64,
    pub pass: bool,
    pub check: DensityCheck,
}

/// Report of the `check-density` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DensityReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub all_pass: bool,
    pub outcomes: Vec<DensityCheckOutcome>,
    pub wall_clock_ms: u64,
}

/// Sign verdict of a rate estimate, decided at four standard errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SignVerdict {
    #[serde(rename = "convergence")]
    Convergence,
    #[serde(rename = "divergence")]
    Divergence,
    #[serde(rename = "indeterminate")]
    Indeterminate,
}

/// Report of the `rate` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RateReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub estimate: RateEstimate,
    /// |route A - route B| within four combined standard errors.
    pub routes_agree: bool,
    pub sign_verdict: SignVerdict,
    pub wall_clock_ms: u64,
}

/// One answered path query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathQueryOutcome {
    pub query: PathQuery,
    pub found: bool,
    pub certificate: Option<PathCertificate>,
}

/// Report of the `paths` command.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathsReport {
    pub tool_version: String,
    pub config: RunConfig,
    pub outcomes: Vec<PathQueryOutcome>,
    pub wall_clock_ms: u64,
}

pub fn sign_verdict(estimate: &RateEstimate) -> SignVerdict {
    let a = estimate.per_iteration_log_step_ratio;
    let se = estimate.se_route_a;
    if a + 4.0 * se < 0.0 {
        SignVerdict::Convergence
    } else if a - 4.0 * se > 0.0 {
        SignVerdict::Divergence
    } else {
        SignVerdict::Indeterminate
    }
}

/// Render a trajectory as CSV: one row per step with the state after the
/// step and the control applied; row 0 carries the initial state with
/// empty control fields.
pub fn trajectory_csv(trajectory: &Trajectory) -> String {
    let n = trajectory.states[0].dim();
    let p = trajectory
        .controls
        .first()
        .map(|c| c.dim())
        .unwrap_or(0);
    let mut out = String::new();
    out.push_str("step");
    for i in 0..n {
        out.push_str(&format!(",x_{i}"));
    }
    for i in 0..p {
        out.push_str(&format!(",w_{i}"));
    }
    out.push('\n');
    for (t, state) in trajectory.states.iter().enumerate() {
        out.push_str(&t.to_string());
        for v in state.coords() {
            out.push_str(&format!(",{v}"));
        }
        if t == 0 {
            for _ in 0..p {
                out.push(',');
            }
        } else {
            for v in trajectory.controls[t - 1].coords() {
                out.push_str(&format!(",{v}"));
            }
        }
        out.push('\n');
    }
    out
}

/// Render density-check bins as CSV.
pub fn histogram_csv(outcomes: &[DensityCheckOutcome]) -> String {
    let mut out = String::from("state,coordinate,lo,hi,empirical,analytic\n");
    for o in outcomes {
        let state = o
            .state
            .iter()
            .map(|v| v.to_string())
            .collect::<Vec<_>>()
            .join(" ");
        for b in &o.check.bins {
            let coord = b.coordinate.map(|c| c.to_string()).unwrap_or_default();
            let lo = b.lo.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            let hi = b.hi.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(" ");
            out.push_str(&format!(
                "{state},{coord},{lo},{hi},{},{}\n",
                b.empirical, b.analytic
            ));
        }
    }
    out
}
