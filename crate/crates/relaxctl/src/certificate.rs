//! Multiplier certificates for the relaxed maximum principle.
//!
//! A certificate for a candidate `(x̂, û_1..û_k, α̂_1..α̂_k)` is a nonzero
//! tuple `(λ0, λ_f, λ_g)` with `λ0 ≥ 0`, `λ_f ≥ 0`, together with a
//! covector path `p(·)` such that
//!
//! 1. `ṗ = -p Σ_i α̂_i φ_x(t, x̂, û_i)` (stationarity),
//! 2. `p(t0) = λ0 f̂0_ζ1 + f̂_ζ1^* λ_f + ĝ_ζ1^* λ_g` and
//!    `p(t1) = -λ0 f̂0_ζ2 - f̂_ζ2^* λ_f - ĝ_ζ2^* λ_g` (transversality),
//! 3. `<λ_f, f(x̂(t0), x̂(t1))> = 0` (complementary slackness),
//! 4. `max_{u ∈ U} <p, φ(t, x̂, u)>` is attained at every weighted vertex and
//!    at the relaxed velocity (maximum condition).
//!
//! Conditions 1–3 are linear in `(λ0, λ_f, λ_g)` once inactive inequality
//! multipliers are pinned to zero, so the solver assembles them into a
//! homogeneous system, extracts its nullspace by SVD, and lets condition 4
//! filter the sampled sign-feasible directions. When every surviving
//! certificate has `λ0` bounded away from zero the candidate is numerically
//! normal at this resolution, which is the hypothesis under which an
//! approximating admissible sequence exists (made constructive in
//! [`crate::chattering`]).

use nalgebra::{DMatrix, DVector, RowDVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::ode::{integrate_adjoint_backward, relaxed_jacobian, AdjointTrajectory, Trajectory};
use crate::problem::ControlProblem;
use crate::relaxed::RelaxedControl;

/// `<p, x>` for a covector/vector pair.
pub fn pairing(p: &RowDVector<f64>, x: &DVector<f64>) -> f64 {
    p.iter().zip(x.iter()).map(|(a, b)| a * b).sum()
}

/// A multiplier tuple plus its adjoint path.
#[derive(Debug, Clone)]
pub struct MultiplierTuple {
    pub lambda0: f64,
    pub lambda_f: DVector<f64>,
    pub lambda_g: DVector<f64>,
    pub adjoint: AdjointTrajectory,
}

impl MultiplierTuple {
    /// 2-norm of `(λ0, λ_f, λ_g)`.
    pub fn multiplier_norm(&self) -> f64 {
        (self.lambda0.powi(2) + self.lambda_f.norm_squared() + self.lambda_g.norm_squared())
            .sqrt()
    }

    /// Rescales multipliers and adjoint together.
    pub fn scaled(&self, c: f64) -> MultiplierTuple {
        let mut adjoint = self.adjoint.clone();
        adjoint.scale(c);
        MultiplierTuple {
            lambda0: self.lambda0 * c,
            lambda_f: &self.lambda_f * c,
            lambda_g: &self.lambda_g * c,
            adjoint,
        }
    }
}

fn multiplier_rows(
    problem: &ControlProblem,
    z1: &DVector<f64>,
    z2: &DVector<f64>,
    lambda0: f64,
    lambda_f: &DVector<f64>,
    lambda_g: &DVector<f64>,
) -> (RowDVector<f64>, RowDVector<f64>) {
    let (c1, c2) = problem.eval_cost_grad(z1, z2);
    let (f1, f2) = problem.eval_ineq_jac(z1, z2);
    let (g1, g2) = problem.eval_eq_jac(z1, z2);
    let lf = RowDVector::from_row_slice(lambda_f.as_slice());
    let lg = RowDVector::from_row_slice(lambda_g.as_slice());
    let t0_target = c1 * lambda0 + &lf * f1 + &lg * g1;
    let t1_value = -(c2 * lambda0 + lf * f2 + lg * g2);
    (t0_target, t1_value)
}

/// Transversality residuals
/// `r0 = p(t0) - (λ0 f̂0_ζ1 + f̂_ζ1^* λ_f + ĝ_ζ1^* λ_g)` and
/// `r1 = p(t1) + λ0 f̂0_ζ2 + f̂_ζ2^* λ_f + ĝ_ζ2^* λ_g`.
pub fn transversality_residual(
    problem: &ControlProblem,
    traj: &Trajectory,
    mt: &MultiplierTuple,
) -> (RowDVector<f64>, RowDVector<f64>) {
    let (t0_target, t1_value) = multiplier_rows(
        problem,
        traj.first(),
        traj.last(),
        mt.lambda0,
        &mt.lambda_f,
        &mt.lambda_g,
    );
    let r0 = mt.adjoint.first() - t0_target;
    let r1 = mt.adjoint.last() - t1_value;
    (r0, r1)
}

/// `<λ_f, f(x̂(t0), x̂(t1))>`; zero when slackness holds.
pub fn slackness_value(
    problem: &ControlProblem,
    traj: &Trajectory,
    mt: &MultiplierTuple,
) -> f64 {
    let f = problem.eval_ineq(traj.first(), traj.last());
    mt.lambda_f.iter().zip(f.iter()).map(|(a, b)| a * b).sum()
}

/// Residual profiles of the maximum condition.
#[derive(Debug, Clone)]
pub struct MaxConditionProfiles {
    /// `rho[i][j] = α̂_i(t_j) (H*(t_j) - <p, φ(t_j, x̂_j, û_i)>)`.
    pub rho: Vec<Vec<f64>>,
    /// `rho_star[j] = H*(t_j) - <p, Σ_i α̂_i φ(t_j, x̂_j, û_i)>`.
    pub rho_star: Vec<f64>,
}

impl MaxConditionProfiles {
    pub fn sup_rho(&self) -> Vec<f64> {
        self.rho
            .iter()
            .map(|profile| profile.iter().copied().fold(f64::NEG_INFINITY, f64::max))
            .collect()
    }

    pub fn sup_rho_star(&self) -> f64 {
        self.rho_star.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min_value(&self) -> f64 {
        let m1 = self
            .rho
            .iter()
            .flat_map(|p| p.iter().copied())
            .fold(f64::INFINITY, f64::min);
        m1.min(self.rho_star.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Evaluates `H*(t_j) = max_{u ∈ grid} <p(t_j), φ(t_j, x̂_j, u)>` and the
/// per-vertex and relaxed-velocity residuals at every node.
pub fn maximum_condition_residuals(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    mt: &MultiplierTuple,
    control_grid: &[DVector<f64>],
) -> Result<MaxConditionProfiles> {
    if control_grid.is_empty() {
        return Err(Error::Input("empty control maximization grid".into()));
    }
    if traj.grid() != rc.grid() {
        return Err(Error::GridMismatch(
            "trajectory and relaxed control use different grids".into(),
        ));
    }
    let grid = traj.grid();
    let k = rc.k();
    let mut rho = vec![Vec::with_capacity(grid.num_nodes()); k];
    let mut rho_star = Vec::with_capacity(grid.num_nodes());
    for (j, t) in grid.nodes().enumerate() {
        let x = traj.state(j);
        let p = mt.adjoint.covector(j);
        let mut hstar = f64::NEG_INFINITY;
        for u in control_grid {
            hstar = hstar.max(pairing(p, &problem.eval_dynamics(t, x, u)));
        }
        let mut h_relaxed = 0.0;
        for (i, rho_i) in rho.iter_mut().enumerate() {
            let h_i = pairing(p, &problem.eval_dynamics(t, x, rc.vertex(i, j)));
            rho_i.push(rc.weight(i, j) * (hstar - h_i));
            h_relaxed += rc.weight(i, j) * h_i;
        }
        rho_star.push(hstar - h_relaxed);
    }
    Ok(MaxConditionProfiles { rho, rho_star })
}

/// Sup over steps of the discrete stationarity defect
/// `‖(p_{j+1} - p_j)/h + p_j Σ_i α̂_i φ_x(t_j, x̂_j, û_i)‖_∞`.
pub fn adjoint_equation_residual(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    mt: &MultiplierTuple,
) -> f64 {
    let grid = traj.grid();
    let h = grid.step();
    let mut sup: f64 = 0.0;
    for j in 0..grid.steps() {
        let a = relaxed_jacobian(problem, rc, j, grid.node(j), traj.state(j));
        let defect = (mt.adjoint.covector(j + 1) - mt.adjoint.covector(j)) / h
            + mt.adjoint.covector(j) * a;
        sup = sup.max(defect.amax());
    }
    sup
}

/// Tolerances for the certificate checks. The adjoint defect is compared
/// against `adjoint_factor * h`.
#[derive(Debug, Clone, Copy)]
pub struct CertTolerances {
    pub transversality: f64,
    pub slackness: f64,
    pub max_condition: f64,
    pub adjoint_factor: f64,
}

impl Default for CertTolerances {
    fn default() -> Self {
        CertTolerances {
            transversality: 1e-6,
            slackness: 1e-6,
            max_condition: 1e-6,
            adjoint_factor: 10.0,
        }
    }
}

/// Residuals and pass flags for one multiplier tuple. All residuals are
/// reported for the normalized tuple (`‖(λ0, λ_f, λ_g)‖ = 1`), so positive
/// rescaling of a tuple never changes a verdict.
#[derive(Debug, Clone)]
pub struct CertificateReport {
    pub r0: RowDVector<f64>,
    pub r1: RowDVector<f64>,
    pub r0_norm: f64,
    pub r1_norm: f64,
    pub slackness: f64,
    pub rho: Vec<Vec<f64>>,
    pub rho_star: Vec<f64>,
    pub sup_rho: Vec<f64>,
    pub sup_rho_star: f64,
    pub adjoint_residual: f64,
    pub adjoint_pass: bool,
    pub transversality_pass: bool,
    pub slackness_pass: bool,
    pub max_condition_pass: bool,
}

impl CertificateReport {
    pub fn passes_all(&self) -> bool {
        self.adjoint_pass && self.transversality_pass && self.slackness_pass
            && self.max_condition_pass
    }
}

/// Builds the full condition report for a tuple, normalizing it first.
pub fn build_report(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    mt: &MultiplierTuple,
    control_grid: &[DVector<f64>],
    tols: &CertTolerances,
) -> Result<CertificateReport> {
    let scale = mt.multiplier_norm();
    if !scale.is_finite() || scale <= 0.0 {
        return Err(Error::Input("multiplier tuple is trivial".into()));
    }
    let normalized = mt.scaled(1.0 / scale);
    let (r0, r1) = transversality_residual(problem, traj, &normalized);
    let r0_norm = r0.amax();
    let r1_norm = r1.amax();
    let slackness = slackness_value(problem, traj, &normalized);
    let profiles = maximum_condition_residuals(problem, traj, rc, &normalized, control_grid)?;
    let adjoint_residual = adjoint_equation_residual(problem, traj, rc, &normalized);
    let h = traj.grid().step();
    let sup_rho = profiles.sup_rho();
    let sup_rho_star = profiles.sup_rho_star();
    let max_condition_pass =
        sup_rho.iter().all(|&s| s <= tols.max_condition) && sup_rho_star <= tols.max_condition;
    Ok(CertificateReport {
        r0,
        r1,
        r0_norm,
        r1_norm,
        slackness,
        rho: profiles.rho,
        rho_star: profiles.rho_star,
        sup_rho,
        sup_rho_star,
        adjoint_residual,
        adjoint_pass: adjoint_residual <= tols.adjoint_factor * h,
        transversality_pass: r0_norm.max(r1_norm) <= tols.transversality,
        slackness_pass: slackness.abs() <= tols.slackness,
        max_condition_pass,
    })
}

/// Options for [`solve_multipliers`].
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    /// Endpoint inequality components with value ≥ `-eps_active` are treated
    /// as active; the rest get multiplier zero, enforcing slackness
    /// structurally.
    pub eps_active: f64,
    /// Relative SVD threshold for the nullspace.
    pub sigma_tol: f64,
    /// Slack allowed when sign-filtering `λ0 ≥ 0`, `λ_f ≥ 0`.
    pub eps_sign: f64,
    /// Angular samples per half-circle when the nullspace is 2-dimensional.
    pub direction_samples: usize,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            eps_active: 1e-8,
            sigma_tol: 1e-10,
            eps_sign: 1e-9,
            direction_samples: 16,
        }
    }
}

#[derive(Debug)]
pub struct SolveOutcome {
    /// Normalized sign-feasible candidates satisfying conditions 1–3 at this
    /// discretization. Empty means the candidate trajectory fails the
    /// necessary conditions outright.
    pub candidates: Vec<MultiplierTuple>,
    pub nullspace_dim: usize,
    pub active_set: Vec<usize>,
    pub warnings: Vec<String>,
}

fn coords_to_multipliers(
    coords: &DVector<f64>,
    active: &[usize],
    m1: usize,
    m2: usize,
) -> (f64, DVector<f64>, DVector<f64>) {
    let lambda0 = coords[0];
    let mut lambda_f = DVector::zeros(m1);
    for (idx, &c) in active.iter().enumerate() {
        lambda_f[c] = coords[1 + idx];
    }
    let lambda_g = DVector::from_fn(m2, |c, _| coords[1 + active.len() + c]);
    (lambda0, lambda_f, lambda_g)
}

/// Orthonormal nullspace basis of `mat` (rows padded with zeros when the
/// system is wide so the full right-singular basis is available), with
/// singular values below `sigma_tol * σ_max` treated as zero. The basis is
/// canonicalized by projecting coordinate axes onto the subspace, so its
/// output depends only on the subspace, not on SVD internals.
fn nullspace_basis(mat: &DMatrix<f64>, sigma_tol: f64) -> Vec<DVector<f64>> {
    let (rows, cols) = mat.shape();
    let padded = if rows < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (rows, cols)).copy_from(mat);
        p
    } else {
        mat.clone()
    };
    let svd = padded.svd(true, true);
    let v_t = svd.v_t.expect("svd with vectors requested");
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0f64, f64::max);
    let mut raw = Vec::new();
    for i in 0..sv.len() {
        if sv[i] <= sigma_tol * smax {
            raw.push(v_t.row(i).transpose());
        }
    }
    canonicalize_basis(raw)
}

fn canonicalize_basis(basis: Vec<DVector<f64>>) -> Vec<DVector<f64>> {
    let d = basis.len();
    if d == 0 {
        return basis;
    }
    let s = basis[0].len();
    let mut out: Vec<DVector<f64>> = Vec::with_capacity(d);
    for c in 0..s {
        if out.len() == d {
            break;
        }
        let mut v = DVector::zeros(s);
        for b in &basis {
            v += b * b[c];
        }
        for b in &out {
            let proj = b.dot(&v);
            v -= b * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            out.push(v / norm);
        }
    }
    for b in &basis {
        if out.len() == d {
            break;
        }
        let mut v = b.clone();
        for o in &out {
            let proj = o.dot(&v);
            v -= o * proj;
        }
        let norm = v.norm();
        if norm > 1e-8 {
            out.push(v / norm);
        }
    }
    for v in &mut out {
        if let Some(idx) = v.iter().position(|&x| x.abs() > 1e-12) {
            if v[idx] < 0.0 {
                *v = -v.clone();
            }
        }
    }
    out
}

fn sample_directions(
    basis: &[DVector<f64>],
    samples: usize,
    warnings: &mut Vec<String>,
) -> Vec<DVector<f64>> {
    match basis.len() {
        0 => Vec::new(),
        1 => vec![basis[0].clone()],
        2 => {
            let q = samples.max(2);
            (0..q)
                .map(|j| {
                    let theta = std::f64::consts::PI * j as f64 / q as f64;
                    &basis[0] * theta.cos() + &basis[1] * theta.sin()
                })
                .collect()
        }
        3 => {
            let mut dirs = Vec::new();
            for a in -1i32..=1 {
                for b in -1i32..=1 {
                    for c in -1i32..=1 {
                        if (a, b, c) == (0, 0, 0) {
                            continue;
                        }
                        // keep one representative per antipodal pair
                        if (a, b, c) < (-a, -b, -c) {
                            continue;
                        }
                        let v = &basis[0] * a as f64 + &basis[1] * b as f64
                            + &basis[2] * c as f64;
                        dirs.push(v.normalize());
                    }
                }
            }
            dirs
        }
        d => {
            warnings.push(format!(
                "nullspace dimension {d} exceeds the sampled cone enumeration (limit 3); \
                 returning basis directions only"
            ));
            basis.to_vec()
        }
    }
}

/// Solves transversality + stationarity + slackness for nontrivial
/// multiplier tuples.
///
/// The inactive inequality multipliers are pinned to zero, each remaining
/// basis tuple fixes `p(t1)` through the transversality equation and is
/// propagated backward through the stationarity ODE, and the resulting
/// linear map from multipliers to the `t0` transversality residual is
/// assembled columnwise. Its nullspace directions are sampled (both signs),
/// sign-filtered, normalized, and returned with their adjoint paths.
pub fn solve_multipliers(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    opts: &SolveOptions,
) -> Result<SolveOutcome> {
    if traj.grid() != rc.grid() {
        return Err(Error::GridMismatch(
            "trajectory and relaxed control use different grids".into(),
        ));
    }
    let (z1, z2) = (traj.first().clone(), traj.last().clone());
    let fvals = problem.eval_ineq(&z1, &z2);
    let active: Vec<usize> = (0..problem.m1)
        .filter(|&c| fvals[c] >= -opts.eps_active)
        .collect();
    let mut warnings = Vec::new();
    if fvals.iter().any(|&v| v > opts.eps_active) {
        warnings.push(format!(
            "endpoint inequality constraints are violated (max {:.3e}); the candidate is \
             infeasible for the original problem",
            fvals.amax()
        ));
    }
    let free = 1 + active.len() + problem.m2;
    let n = problem.n;

    let mut mat = DMatrix::zeros(n, free);
    for col in 0..free {
        let mut coords = DVector::zeros(free);
        coords[col] = 1.0;
        let (l0, lf, lg) = coords_to_multipliers(&coords, &active, problem.m1, problem.m2);
        let (t0_target, p1) = multiplier_rows(problem, &z1, &z2, l0, &lf, &lg);
        let adj = integrate_adjoint_backward(problem, traj, rc, &p1)?;
        let r0 = adj.first() - t0_target;
        for row in 0..n {
            mat[(row, col)] = r0[row];
        }
    }

    let basis = nullspace_basis(&mat, opts.sigma_tol);
    let dim = basis.len();
    if dim > 3 {
        warnings.push(format!(
            "nullspace dimension {dim} > 3 suggests a degenerate discretization"
        ));
    }
    let directions = sample_directions(&basis, opts.direction_samples, &mut warnings);

    let mut candidates: Vec<MultiplierTuple> = Vec::new();
    let mut kept_coords: Vec<DVector<f64>> = Vec::new();
    for dir in &directions {
        for sign in [1.0f64, -1.0] {
            let coords = dir * sign;
            let (l0, lf, _lg) =
                coords_to_multipliers(&coords, &active, problem.m1, problem.m2);
            if l0 < -opts.eps_sign {
                continue;
            }
            if lf.iter().any(|&v| v < -opts.eps_sign) {
                continue;
            }
            // clamp the sign-constrained coordinates and renormalize
            let mut coords = coords.clone();
            coords[0] = coords[0].max(0.0);
            for idx in 0..active.len() {
                coords[1 + idx] = coords[1 + idx].max(0.0);
            }
            let norm = coords.norm();
            if norm <= opts.eps_sign {
                continue;
            }
            coords /= norm;
            if kept_coords.iter().any(|c| (c - &coords).amax() <= 1e-9) {
                continue;
            }
            let (l0, lf, lg) =
                coords_to_multipliers(&coords, &active, problem.m1, problem.m2);
            let (_, p1) = multiplier_rows(problem, &z1, &z2, l0, &lf, &lg);
            let adjoint = integrate_adjoint_backward(problem, traj, rc, &p1)?;
            kept_coords.push(coords);
            candidates.push(MultiplierTuple {
                lambda0: l0,
                lambda_f: lf,
                lambda_g: lg,
                adjoint,
            });
        }
    }
    Ok(SolveOutcome {
        candidates,
        nullspace_dim: dim,
        active_set: active,
        warnings,
    })
}

/// Outcome of the normality decision over the verified candidate set.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalityOutcome {
    /// Every candidate passing conditions 1–4 has `λ0` bounded away from
    /// zero: the approximating-sequence guarantee applies.
    Normal,
    /// Some candidate passes all conditions with `λ0 ≈ 0`.
    Abnormal,
    /// No candidate passes all conditions: the necessary conditions
    /// themselves fail, which is a distinct outcome from normality.
    NoCertificate,
}

impl Serialize for NormalityOutcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            NormalityOutcome::Normal => serializer.serialize_bool(true),
            NormalityOutcome::Abnormal => serializer.serialize_bool(false),
            NormalityOutcome::NoCertificate => serializer.serialize_str("no_certificate"),
        }
    }
}

impl NormalityOutcome {
    pub fn is_normal(&self) -> bool {
        matches!(self, NormalityOutcome::Normal)
    }
}

/// Decides normality over the complete verified candidate set: normal iff
/// every candidate whose report passes conditions 1–4 has `λ0 > eps`.
/// An empty passing set is reported as [`NormalityOutcome::NoCertificate`]
/// rather than vacuous normality.
pub fn normality_check(
    results: &[(MultiplierTuple, CertificateReport)],
    eps: f64,
) -> NormalityOutcome {
    let passing: Vec<&MultiplierTuple> = results
        .iter()
        .filter(|(_, report)| report.passes_all())
        .map(|(mt, _)| mt)
        .collect();
    if passing.is_empty() {
        NormalityOutcome::NoCertificate
    } else if passing.iter().all(|mt| mt.lambda0 > eps) {
        NormalityOutcome::Normal
    } else {
        NormalityOutcome::Abnormal
    }
}

#[derive(Debug)]
pub struct CertifyOutcome {
    pub results: Vec<(MultiplierTuple, CertificateReport)>,
    pub normality: NormalityOutcome,
    pub nullspace_dim: usize,
    pub warnings: Vec<String>,
}

impl CertifyOutcome {
    pub fn passing(&self) -> Vec<&(MultiplierTuple, CertificateReport)> {
        self.results.iter().filter(|(_, r)| r.passes_all()).collect()
    }
}

/// Full pipeline: solve for candidates, verify all four conditions on each,
/// and decide normality.
pub fn certify(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    control_grid_points: usize,
    tols: &CertTolerances,
    opts: &SolveOptions,
) -> Result<CertifyOutcome> {
    let solved = solve_multipliers(problem, traj, rc, opts)?;
    let grid = problem.control_set.maximization_grid(control_grid_points);
    let mut results = Vec::with_capacity(solved.candidates.len());
    for mt in solved.candidates {
        let report = build_report(problem, traj, rc, &mt, &grid, tols)?;
        results.push((mt, report));
    }
    let normality = normality_check(&results, 1e-9);
    Ok(CertifyOutcome {
        results,
        normality,
        nullspace_dim: solved.nullspace_dim,
        warnings: solved.warnings,
    })
}
