//! JSON run configuration shared by all CLI commands.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Number of grid steps for generated trajectories.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    /// Sample density for control-set maximization (per interval component).
    #[serde(default = "default_control_grid_points")]
    pub control_grid_points: usize,
    /// Slab counts for the approximating sequences.
    #[serde(default = "default_ns")]
    pub ns: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub certify: CertifySection,
    #[serde(default)]
    pub chatter: ChatterSection,
    #[serde(default)]
    pub calcvar: CalcvarSection,
    #[serde(default)]
    pub files: FilesSection,
}

fn default_grid() -> usize {
    1000
}

fn default_control_grid_points() -> usize {
    2001
}

fn default_ns() -> Vec<usize> {
    vec![4, 16, 64, 256]
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    /// One of `example1`, `example2`, `quadratic_cv`.
    pub builtin: String,
    #[serde(default)]
    pub params: ProblemParams,
    /// Truncation bound for unbounded control sets.
    #[serde(default = "default_bound")]
    pub control_bound: f64,
}

fn default_bound() -> f64 {
    10.0
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemParams {
    /// Tracked-path name (example1), e.g. `linear_half`.
    pub f: Option<String>,
    /// Control-cost name (example1), e.g. `square`.
    pub g: Option<String>,
    /// Even tracking power (example1).
    pub m: Option<u32>,
    /// Lagrangian name (example2 / quadratic_cv), e.g. `x_udot_sq`.
    pub l: Option<String>,
    /// Boundary values (quadratic_cv).
    pub x0: Option<f64>,
    pub x1: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Transversality and slackness tolerance.
    pub tol_cert: f64,
    /// Maximum-condition residual tolerance.
    pub tol_max: f64,
    /// Variational-condition tolerance.
    pub tol_cv: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            tol_cert: 1e-6,
            tol_max: 1e-6,
            tol_cv: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifySection {
    /// Constant shift applied to the generated candidate's first state
    /// component; nonzero values probe falsification.
    #[serde(default)]
    pub perturb_x1: f64,
}

/// Bound of the form `value ≤ coeff / N^power`, checked per row.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DecayBound {
    pub coeff: f64,
    pub power: f64,
}

impl DecayBound {
    pub fn allows(&self, n: usize, value: f64) -> bool {
        value <= self.coeff / (n as f64).powf(self.power)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatterSection {
    /// `example1` (exact broken line, default for the tracking family) or
    /// `generic` (slab-averaged synthesis).
    pub mode: Option<String>,
    pub gap_bound: Option<DecayBound>,
    pub dev_bound: Option<DecayBound>,
    /// Cost target; defaults to the problem's known infimum when available.
    pub j_star: Option<f64>,
    #[serde(default = "default_refine_q")]
    pub refine_q: usize,
}

// keep the missing-section default in sync with the per-field default
impl Default for ChatterSection {
    fn default() -> Self {
        ChatterSection {
            mode: None,
            gap_bound: None,
            dev_bound: None,
            j_star: None,
            refine_q: default_refine_q(),
        }
    }
}

fn default_refine_q() -> usize {
    16
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalcvarSection {
    /// Constant vertex controls; omitted means the classical embedding
    /// (the trajectory's own velocity with weight one).
    pub vertices: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub u_grid: crate::calcvar::UGrid,
    #[serde(default)]
    pub falsifier_grid: crate::calcvar::FalsifierGrid,
    /// Set to force the falsifier on or off; by default it runs whenever its
    /// hypotheses hold.
    pub run_falsifier: Option<bool>,
    #[serde(default = "default_usl_tol")]
    pub usl_tol: f64,
}

impl Default for CalcvarSection {
    fn default() -> Self {
        CalcvarSection {
            vertices: None,
            u_grid: crate::calcvar::UGrid::default(),
            falsifier_grid: crate::calcvar::FalsifierGrid::default(),
            run_falsifier: None,
            usl_tol: default_usl_tol(),
        }
    }
}

fn default_usl_tol() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilesSection {
    /// Candidate trajectory CSV (columns `t,x_1..x_n`).
    pub trajectory_csv: Option<std::path::PathBuf>,
    /// Relaxed control CSV (columns `t,u*,alpha*`).
    pub relaxed_csv: Option<std::path::PathBuf>,
}

impl RunConfig {
    pub fn from_bytes(bytes: &[u8]) -> Result<(Self, String)> {
        let config: RunConfig = serde_json::from_slice(bytes)?;
        config.validate()?;
        let digest = Sha256::digest(bytes);
        let hash = digest.iter().map(|b| format!("{b:02x}")).collect::<String>();
        Ok((config, hash))
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid < 10 {
            return Err(Error::Input(format!(
                "grid must be at least 10 steps, got {}",
                self.grid
            )));
        }
        let t = &self.tolerances;
        if !(t.tol_cert > 0.0 && t.tol_max > 0.0 && t.tol_cv > 0.0) {
            return Err(Error::Input("tolerances must be positive".into()));
        }
        if self.control_grid_points < 2 {
            return Err(Error::Input("control_grid_points must be at least 2".into()));
        }
        if self.ns.is_empty() || self.ns[0] == 0 {
            return Err(Error::Input("ns must be nonempty and positive".into()));
        }
        if self.ns.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Input("ns must be strictly increasing".into()));
        }
        match self.problem.builtin.as_str() {
            "example1" | "example2" | "quadratic_cv" => {}
            other => {
                return Err(Error::Input(format!("unknown builtin problem {other:?}")));
            }
        }
        if self.files.trajectory_csv.is_some() != self.files.relaxed_csv.is_some()
            && self.problem.builtin == "example1"
        {
            return Err(Error::Input(
                "trajectory_csv and relaxed_csv must be supplied together".into(),
            ));
        }
        Ok(())
    }
}
