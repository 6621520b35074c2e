//! Sliding-regime (relaxed) controls: `k` vertex controls `û_i(·)` with
//! simplex weights `α̂_i(·)` on a shared grid, plus the decomposition of a
//! candidate velocity (and optionally a Lagrangian value) into a convex
//! combination over the vertices.

use std::io::{BufRead, Write};

use nalgebra::{DMatrix, DVector};

use crate::calcvar::LagrangianProblem;
use crate::error::{Error, Result};
use crate::ode::{ControlSignal, TimeGrid, Trajectory};
use crate::problem::{ControlProblem, ControlSet};

/// `k` vertex control signals plus simplex weight signals on a grid.
///
/// At every node the weights should be nonnegative and sum to one, every
/// vertex sample should belong to the control set, and no weight signal
/// should vanish identically; [`validate`] reports violations rather than
/// the constructor rejecting them, since degenerate decompositions are
/// legitimate intermediate data.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedControl {
    grid: TimeGrid,
    /// `vertices[i][j]` is `û_i(t_j)`.
    vertices: Vec<Vec<DVector<f64>>>,
    /// `weights[i][j]` is `α̂_i(t_j)`.
    weights: Vec<Vec<f64>>,
}

impl RelaxedControl {
    pub fn new(
        grid: TimeGrid,
        vertices: Vec<Vec<DVector<f64>>>,
        weights: Vec<Vec<f64>>,
    ) -> Result<Self> {
        if vertices.is_empty() || vertices.len() != weights.len() {
            return Err(Error::Input(
                "relaxed control needs matching, nonempty vertex and weight lists".into(),
            ));
        }
        let nodes = grid.num_nodes();
        if vertices.iter().any(|v| v.len() != nodes) || weights.iter().any(|w| w.len() != nodes) {
            return Err(Error::GridMismatch(
                "vertex/weight signals must have one sample per grid node".into(),
            ));
        }
        let r = vertices[0][0].len();
        if vertices.iter().any(|v| v.iter().any(|u| u.len() != r)) {
            return Err(Error::Input("vertex samples of mixed dimension".into()));
        }
        Ok(RelaxedControl {
            grid,
            vertices,
            weights,
        })
    }

    /// Constant vertices and weights across the whole grid.
    pub fn constant(
        grid: TimeGrid,
        vertices: Vec<DVector<f64>>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let nodes = grid.num_nodes();
        let v = vertices
            .into_iter()
            .map(|u| vec![u; nodes])
            .collect::<Vec<_>>();
        let w = weights.into_iter().map(|a| vec![a; nodes]).collect();
        RelaxedControl::new(grid, v, w)
    }

    /// The classical embedding `k = 1`, `α ≡ 1` of an ordinary control.
    pub fn from_signal(signal: &ControlSignal) -> Self {
        RelaxedControl {
            grid: *signal.grid(),
            vertices: vec![signal.samples().to_vec()],
            weights: vec![vec![1.0; signal.grid().num_nodes()]],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn k(&self) -> usize {
        self.vertices.len()
    }

    pub fn control_dim(&self) -> usize {
        self.vertices[0][0].len()
    }

    pub fn vertex(&self, i: usize, j: usize) -> &DVector<f64> {
        &self.vertices[i][j]
    }

    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.weights[i][j]
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        let (k, r) = (self.k(), self.control_dim());
        let mut header = String::from("t");
        for i in 1..=k {
            if r == 1 {
                header.push_str(&format!(",u{i}"));
            } else {
                for c in 1..=r {
                    header.push_str(&format!(",u{i}_{c}"));
                }
            }
        }
        for i in 1..=k {
            header.push_str(&format!(",alpha{i}"));
        }
        writeln!(out, "{header}")?;
        for (j, t) in self.grid.nodes().enumerate() {
            let mut line = format!("{t}");
            for i in 0..k {
                for c in 0..r {
                    line.push_str(&format!(",{}", self.vertices[i][j][c]));
                }
            }
            for i in 0..k {
                line.push_str(&format!(",{}", self.weights[i][j]));
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut lines = input.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::Input("empty relaxed-control csv".into()))??;
        let cols: Vec<String> = header.trim().split(',').map(str::to_string).collect();
        if cols.first().map(String::as_str) != Some("t") {
            return Err(Error::Input("relaxed-control csv must start with t".into()));
        }
        let k = cols.iter().filter(|c| c.starts_with("alpha")).count();
        if k == 0 {
            return Err(Error::Input("relaxed-control csv has no alpha columns".into()));
        }
        let vertex_cols = cols.len() - 1 - k;
        if !vertex_cols.is_multiple_of(k) {
            return Err(Error::Input(
                "relaxed-control csv vertex columns not divisible by k".into(),
            ));
        }
        let r = vertex_cols / k;
        let mut times = Vec::new();
        let mut vertices: Vec<Vec<DVector<f64>>> = vec![Vec::new(); k];
        let mut weights: Vec<Vec<f64>> = vec![Vec::new(); k];
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.trim().split(',').collect();
            if fields.len() != cols.len() {
                return Err(Error::Input(format!(
                    "relaxed-control csv row {} has {} fields, expected {}",
                    lineno + 2,
                    fields.len(),
                    cols.len()
                )));
            }
            let parse = |s: &str| -> Result<f64> {
                s.parse::<f64>()
                    .map_err(|_| Error::Input(format!("bad number {s:?} on row {}", lineno + 2)))
            };
            times.push(parse(fields[0])?);
            for i in 0..k {
                let mut u = DVector::zeros(r);
                for c in 0..r {
                    u[c] = parse(fields[1 + i * r + c])?;
                }
                vertices[i].push(u);
            }
            for i in 0..k {
                weights[i].push(parse(fields[1 + k * r + i])?);
            }
        }
        let grid = crate::ode::grid_from_times(&times)?;
        RelaxedControl::new(grid, vertices, weights)
    }
}

/// A single constraint violation found by [`validate`].
#[derive(Debug, Clone, PartialEq)]
pub enum RelaxedViolation {
    NegativeWeight { node: usize, vertex: usize, value: f64 },
    SimplexSum { node: usize, deviation: f64 },
    Membership { node: usize, vertex: usize },
    IdenticallyZeroWeight { vertex: usize },
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub violations: Vec<RelaxedViolation>,
}

impl ValidationReport {
    pub fn pass(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks nonnegativity, the simplex sum (within `tol`), vertex membership
/// in the control set, and that no weight signal is identically zero.
pub fn validate(rc: &RelaxedControl, cs: &ControlSet, tol: f64) -> ValidationReport {
    let mut violations = Vec::new();
    for j in 0..rc.grid().num_nodes() {
        let mut sum = 0.0;
        for i in 0..rc.k() {
            let a = rc.weight(i, j);
            sum += a;
            if a < -tol {
                violations.push(RelaxedViolation::NegativeWeight {
                    node: j,
                    vertex: i,
                    value: a,
                });
            }
            if !cs.contains(rc.vertex(i, j), 1e-9) {
                violations.push(RelaxedViolation::Membership { node: j, vertex: i });
            }
        }
        if (sum - 1.0).abs() > tol {
            violations.push(RelaxedViolation::SimplexSum {
                node: j,
                deviation: (sum - 1.0).abs(),
            });
        }
    }
    for i in 0..rc.k() {
        let max_weight = (0..rc.grid().num_nodes())
            .map(|j| rc.weight(i, j))
            .fold(f64::NEG_INFINITY, f64::max);
        if max_weight <= 0.0 {
            violations.push(RelaxedViolation::IdenticallyZeroWeight { vertex: i });
        }
    }
    ValidationReport { violations }
}

/// Least squares over the unit simplex:
/// `min ‖A α - b‖_2` subject to `α ≥ 0`, `Σ α = 1`.
///
/// Active-set method in the Lawson–Hanson style with the equality constraint
/// kept in the KKT system. The KKT solves use an SVD pseudo-inverse so that
/// affinely dependent columns yield some least-norm optimum instead of a
/// failure; with non-unique optima any minimizer may be returned.
pub fn simplex_least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let k = a.ncols();
    assert!(k >= 1, "need at least one column");
    if k == 1 {
        return DVector::from_element(1, 1.0);
    }
    let gram = a.tr_mul(a);
    let atb = a.tr_mul(b);
    let scale = 1.0 + gram.amax().max(atb.amax());

    // Feasible start: the single vertex with the smallest residual.
    let start = (0..k)
        .min_by(|&i, &j| {
            let ri = (a.column(i) - b).norm_squared();
            let rj = (a.column(j) - b).norm_squared();
            ri.partial_cmp(&rj).unwrap()
        })
        .unwrap();
    let mut passive = vec![false; k];
    passive[start] = true;
    let mut alpha = DVector::zeros(k);
    alpha[start] = 1.0;

    let mut best = alpha.clone();
    let mut best_res = (a * &alpha - b).norm_squared();

    let solve_kkt = |passive: &[bool]| -> (DVector<f64>, f64) {
        let idx: Vec<usize> = (0..k).filter(|&i| passive[i]).collect();
        let p = idx.len();
        let mut kkt = DMatrix::zeros(p + 1, p + 1);
        let mut rhs = DVector::zeros(p + 1);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                kkt[(r, c)] = gram[(i, j)];
            }
            kkt[(r, p)] = 1.0;
            kkt[(p, r)] = 1.0;
            rhs[r] = atb[i];
        }
        rhs[p] = 1.0;
        // LU when the system is regular; SVD pseudo-inverse with iterative
        // refinement for affinely dependent columns (any least-norm optimum
        // is acceptable there)
        let sol = kkt
            .clone()
            .lu()
            .solve(&rhs)
            .filter(|s| (&kkt * s - &rhs).amax() <= 1e-9 * scale)
            .unwrap_or_else(|| {
                let svd = kkt.clone().svd(true, true);
                let eps = 1e-12 * scale;
                let mut s = svd
                    .solve(&rhs, eps)
                    .unwrap_or_else(|_| DVector::zeros(p + 1));
                for _ in 0..2 {
                    let defect = &rhs - &kkt * &s;
                    if defect.amax() <= 1e-13 * scale {
                        break;
                    }
                    match svd.solve(&defect, eps) {
                        Ok(ds) => s += ds,
                        Err(_) => break,
                    }
                }
                s
            });
        let mut z = DVector::zeros(k);
        for (r, &i) in idx.iter().enumerate() {
            z[i] = sol[r];
        }
        (z, sol[p])
    };

    let max_outer = 10 * k + 20;
    for _ in 0..max_outer {
        // Restore primal feasibility on the passive set.
        let mut guard = 2 * k + 4;
        let nu = loop {
            let (z, nu_z) = solve_kkt(&passive);
            let feasible = (0..k).filter(|&i| passive[i]).all(|i| z[i] >= -1e-12);
            if feasible {
                alpha = z.map(|v| v.max(0.0));
                break nu_z;
            }
            // Step toward z until the first passive coordinate hits zero.
            let mut theta = 1.0f64;
            for i in (0..k).filter(|&i| passive[i]) {
                if z[i] < 0.0 && alpha[i] > z[i] {
                    theta = theta.min(alpha[i] / (alpha[i] - z[i]));
                }
            }
            for i in (0..k).filter(|&i| passive[i]) {
                alpha[i] += theta * (z[i] - alpha[i]);
            }
            for i in 0..k {
                if passive[i] && alpha[i] <= 1e-12 {
                    passive[i] = false;
                    alpha[i] = 0.0;
                }
            }
            if !passive.iter().any(|&p| p) {
                // Numerically everything collapsed; restart from the best vertex.
                passive[start] = true;
                alpha[start] = 1.0;
            }
            guard -= 1;
            if guard == 0 {
                break nu_z;
            }
        };

        let res = (a * &alpha - b).norm_squared();
        if res < best_res {
            best_res = res;
            best = alpha.clone();
        }

        // Dual feasibility: for inactive i the multiplier of α_i ≥ 0 is
        // -(∇f_i + ν); all must be ≤ 0 at the optimum.
        let grad = &gram * &alpha - &atb;
        let mut worst = 0.0;
        let mut enter = None;
        for i in (0..k).filter(|&i| !passive[i]) {
            let w = grad[i] + nu;
            if w < worst {
                worst = w;
                enter = Some(i);
            }
        }
        match enter {
            Some(i) if worst < -1e-10 * scale => passive[i] = true,
            _ => break,
        }
    }

    let res = (a * &alpha - b).norm_squared();
    let mut out = if res <= best_res { alpha } else { best };
    // Project-and-renormalize so the simplex invariants hold exactly.
    for v in out.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = out.iter().sum();
    if sum > 0.0 {
        out /= sum;
    } else {
        out.fill(1.0 / k as f64);
    }
    out
}

/// Result of decomposing one velocity (and optional Lagrangian value).
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub alpha: DVector<f64>,
    /// `‖Σ α_i u_i - v‖_2` at the returned weights.
    pub velocity_residual: f64,
    /// `|Σ α_i ℓ_i - ℓ̂|` when the matching constraint was supplied, else 0.
    pub aux_residual: f64,
    pub feasible: bool,
}

impl Decomposition {
    /// Combined 2-norm residual over the stacked constraint rows.
    pub fn total_residual(&self) -> f64 {
        (self.velocity_residual.powi(2) + self.aux_residual.powi(2)).sqrt()
    }
}

/// Decomposes `v` as `Σ α_i u_i` with simplex weights; the optional
/// `aux = (ℓ̂, ℓ_1..ℓ_k)` appends the Lagrangian-matching row
/// `Σ α_i ℓ_i = ℓ̂` with the same tolerance. Infeasibility (residual above
/// `tol`) is a returned outcome, not an error.
pub fn decompose_velocity(
    v: &DVector<f64>,
    vertices: &[DVector<f64>],
    aux: Option<(f64, &[f64])>,
    tol: f64,
) -> Decomposition {
    let k = vertices.len();
    assert!(k >= 1, "need at least one vertex");
    let n = v.len();
    let rows = n + usize::from(aux.is_some());
    let mut a = DMatrix::zeros(rows, k);
    let mut b = DVector::zeros(rows);
    for (i, u) in vertices.iter().enumerate() {
        for c in 0..n {
            a[(c, i)] = u[c];
        }
    }
    for c in 0..n {
        b[c] = v[c];
    }
    if let Some((lhat, ls)) = aux {
        for (i, &l) in ls.iter().enumerate() {
            a[(n, i)] = l;
        }
        b[n] = lhat;
    }
    let alpha = simplex_least_squares(&a, &b);
    let mut vel = DVector::zeros(n);
    for (i, u) in vertices.iter().enumerate() {
        vel += u * alpha[i];
    }
    let velocity_residual = (vel - v).norm();
    let aux_residual = match aux {
        Some((lhat, ls)) => {
            (ls.iter()
                .zip(alpha.iter())
                .map(|(l, a)| l * a)
                .sum::<f64>()
                - lhat)
                .abs()
        }
        None => 0.0,
    };
    let feasible = velocity_residual <= tol && aux_residual <= tol;
    Decomposition {
        alpha,
        velocity_residual,
        aux_residual,
        feasible,
    }
}

/// A node where the decomposition residual exceeded the tolerance.
#[derive(Debug, Clone)]
pub struct NodeInfeasibility {
    pub node: usize,
    pub t: f64,
    pub velocity_residual: f64,
    pub aux_residual: f64,
}

#[derive(Debug)]
pub enum DecomposeOutcome {
    Feasible(RelaxedControl),
    Infeasible(Vec<NodeInfeasibility>),
}

/// Nodewise finite-difference velocity; the last node reuses the previous
/// backward difference (almost-everywhere conditions are insensitive to one
/// node).
pub fn node_velocities(traj: &Trajectory) -> Vec<DVector<f64>> {
    let grid = traj.grid();
    let h = grid.step();
    let m = grid.steps();
    let mut v: Vec<DVector<f64>> = (0..m)
        .map(|j| (traj.state(j + 1) - traj.state(j)) / h)
        .collect();
    v.push(v[m - 1].clone());
    v
}

/// Decomposes the trajectory's velocity over vertex controls for a control
/// problem: at node `j` the columns are `φ(t_j, x̂_j, û_i(t_j))`.
pub fn decompose_along_trajectory_control(
    problem: &ControlProblem,
    traj: &Trajectory,
    vertex_signals: &[Vec<DVector<f64>>],
    tol: f64,
) -> Result<DecomposeOutcome> {
    decompose_nodes(traj, vertex_signals, tol, |j, t, vertices| {
        let cols = vertices
            .iter()
            .map(|u| problem.eval_dynamics(t, traj.state(j), u))
            .collect::<Vec<_>>();
        (cols, None)
    })
}

/// Decomposes velocity and Lagrangian value jointly for a variational
/// problem (`ẋ = u`): columns are the vertices themselves, the matching row
/// carries `L(t_j, x̂_j, û_i)` against `L(t_j, x̂_j, v_j)`.
pub fn decompose_along_trajectory_lagrangian(
    lp: &LagrangianProblem,
    traj: &Trajectory,
    vertex_signals: &[Vec<DVector<f64>>],
    tol: f64,
) -> Result<DecomposeOutcome> {
    let velocities = node_velocities(traj);
    decompose_nodes(traj, vertex_signals, tol, |j, t, vertices| {
        let cols = vertices.to_vec();
        let lhat = lp.eval_l(t, traj.state(j), &velocities[j]);
        let ls = vertices
            .iter()
            .map(|u| lp.eval_l(t, traj.state(j), u))
            .collect::<Vec<_>>();
        (cols, Some((lhat, ls)))
    })
}

/// Per-node constraint data: the vertex columns plus the optional
/// Lagrangian-matching row `(ℓ̂, ℓ_1..ℓ_k)`.
type NodeSystem = (Vec<DVector<f64>>, Option<(f64, Vec<f64>)>);

fn decompose_nodes(
    traj: &Trajectory,
    vertex_signals: &[Vec<DVector<f64>>],
    tol: f64,
    node_system: impl Fn(usize, f64, &[DVector<f64>]) -> NodeSystem,
) -> Result<DecomposeOutcome> {
    let grid = *traj.grid();
    let k = vertex_signals.len();
    if k == 0 {
        return Err(Error::Input("need at least one vertex signal".into()));
    }
    if vertex_signals.iter().any(|v| v.len() != grid.num_nodes()) {
        return Err(Error::GridMismatch(
            "vertex signals must have one sample per trajectory node".into(),
        ));
    }
    let velocities = node_velocities(traj);
    let mut weights: Vec<Vec<f64>> = (0..k)
        .map(|_| Vec::with_capacity(grid.num_nodes()))
        .collect();
    let mut failures = Vec::new();
    for (j, t) in grid.nodes().enumerate() {
        let vertices_j: Vec<DVector<f64>> =
            vertex_signals.iter().map(|sig| sig[j].clone()).collect();
        let (cols, aux) = node_system(j, t, &vertices_j);
        let dec = match &aux {
            Some((lhat, ls)) => decompose_velocity(&velocities[j], &cols, Some((*lhat, ls)), tol),
            None => decompose_velocity(&velocities[j], &cols, None, tol),
        };
        if !dec.feasible {
            failures.push(NodeInfeasibility {
                node: j,
                t,
                velocity_residual: dec.velocity_residual,
                aux_residual: dec.aux_residual,
            });
        }
        for (w, a) in weights.iter_mut().zip(dec.alpha.iter()) {
            w.push(*a);
        }
    }
    if failures.is_empty() {
        let rc = RelaxedControl::new(grid, vertex_signals.to_vec(), weights)?;
        Ok(DecomposeOutcome::Feasible(rc))
    } else {
        Ok(DecomposeOutcome::Infeasible(failures))
    }
}

/// Replicates constant vertex controls into per-node signals.
pub fn constant_vertex_signals(
    grid: &TimeGrid,
    vertices: &[DVector<f64>],
) -> Vec<Vec<DVector<f64>>> {
    vertices
        .iter()
        .map(|u| vec![u.clone(); grid.num_nodes()])
        .collect()
}
