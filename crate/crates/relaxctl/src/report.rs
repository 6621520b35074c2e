//! Machine-readable report structures emitted by the CLI commands. Field
//! order is fixed so identical runs serialize to identical bytes.

use serde::Serialize;

use crate::certificate::{CertificateReport, MultiplierTuple, NormalityOutcome};
use crate::chattering::ConvergenceRow;
use crate::config::{DecayBound, Tolerances};

#[derive(Debug, Clone, Copy, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PassFail {
    Pass,
    Fail,
}

impl From<bool> for PassFail {
    fn from(b: bool) -> Self {
        if b {
            PassFail::Pass
        } else {
            PassFail::Fail
        }
    }
}

#[derive(Debug, Serialize)]
pub struct MaxConditionSummary {
    pub sup_rho_i: Vec<f64>,
    pub sup_rho_star: f64,
}

#[derive(Debug, Serialize)]
pub struct ConditionsSummary {
    pub adjoint: PassFail,
    /// `[‖r0‖_∞, ‖r1‖_∞]`.
    pub transversality: [f64; 2],
    pub slackness: f64,
    pub max_condition: MaxConditionSummary,
}

#[derive(Debug, Serialize)]
pub struct CandidateSummary {
    pub lambda0: f64,
    pub lambda_f: Vec<f64>,
    pub lambda_g: Vec<f64>,
    pub normalized: bool,
    pub conditions: ConditionsSummary,
    pub passes_all: bool,
}

impl CandidateSummary {
    pub fn from_result(mt: &MultiplierTuple, report: &CertificateReport) -> Self {
        CandidateSummary {
            lambda0: mt.lambda0,
            lambda_f: mt.lambda_f.iter().copied().collect(),
            lambda_g: mt.lambda_g.iter().copied().collect(),
            normalized: (mt.multiplier_norm() - 1.0).abs() <= 1e-9,
            conditions: ConditionsSummary {
                adjoint: report.adjoint_pass.into(),
                transversality: [report.r0_norm, report.r1_norm],
                slackness: report.slackness,
                max_condition: MaxConditionSummary {
                    sup_rho_i: report.sup_rho.clone(),
                    sup_rho_star: report.sup_rho_star,
                },
            },
            passes_all: report.passes_all(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct CertifyReport {
    pub command: &'static str,
    pub config_sha256: String,
    pub grid: usize,
    pub tolerances: Tolerances,
    pub control_grid_points: usize,
    pub nullspace_dim: usize,
    pub warnings: Vec<String>,
    pub candidates: Vec<CandidateSummary>,
    pub normality: NormalityOutcome,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct ChatterReport {
    pub command: &'static str,
    pub config_sha256: String,
    pub grid: usize,
    pub mode: String,
    pub refine_q: usize,
    pub j_star: f64,
    pub normality: Option<NormalityOutcome>,
    pub normality_overridden: bool,
    pub rows: Vec<ConvergenceRow>,
    pub gap_bound: Option<DecayBound>,
    pub dev_bound: Option<DecayBound>,
    pub gaps_monotone: bool,
    pub final_gap: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct WitnessPoint {
    pub node: usize,
    pub t: f64,
    pub vertex: usize,
    pub u: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct EulerSummary {
    pub sup_residual: f64,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct WeierstrassSummary {
    pub min_excess: f64,
    pub witness: WitnessPoint,
    pub u_bound: [f64; 2],
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct LegendreSummary {
    pub min_eigenvalue: f64,
    pub witness_node: usize,
    pub witness_vertex: usize,
    pub symmetry_warning: bool,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct FalsifierSummary {
    /// `pass`, `violation`, or `skipped`.
    pub status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witness: Option<FalsifierWitness>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped_reason: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct FalsifierWitness {
    pub u1: f64,
    pub u2: f64,
    pub residual: f64,
}

#[derive(Debug, Serialize)]
pub struct CalcvarReport {
    pub command: &'static str,
    pub config_sha256: String,
    pub grid: usize,
    pub tolerances: Tolerances,
    pub k: usize,
    pub euler: EulerSummary,
    pub weierstrass: WeierstrassSummary,
    pub legendre: LegendreSummary,
    pub falsifier: FalsifierSummary,
    pub pass: bool,
}

#[derive(Debug, Serialize)]
pub struct GradcheckReport {
    pub command: &'static str,
    pub config_sha256: String,
    pub seed: u64,
    pub samples: usize,
    pub h: f64,
    pub tol: f64,
    pub entries: Vec<crate::problem::GradCheckEntry>,
    pub pass: bool,
}
