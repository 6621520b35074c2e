//! Fixed-grid integration of the state system, the relaxed state system, and
//! the backward adjoint system, plus the trajectory containers used
//! throughout the crate.
//!
//! Controls are sample-and-hold: the value stored at node `j` is held
//! constant on `[t_j, t_{j+1})`, including across the internal Runge-Kutta
//! stages of that step. Trajectories are interpolated piecewise linearly.

use std::io::{BufRead, Write};

use nalgebra::{DVector, RowDVector};

use crate::error::{Error, Result};
use crate::problem::ControlProblem;
use crate::relaxed::RelaxedControl;

/// Uniform grid `t_j = t0 + j (t1 - t0) / m`, `j = 0..=m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t0: f64,
    t1: f64,
    m: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t1: f64, m: usize) -> Result<Self> {
        if !(t0.is_finite() && t1.is_finite() && t0 < t1) {
            return Err(Error::Input(format!(
                "time grid requires finite t0 < t1, got [{t0}, {t1}]"
            )));
        }
        if m == 0 {
            return Err(Error::Input("time grid requires at least one step".into()));
        }
        Ok(TimeGrid { t0, t1, m })
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    /// Number of steps; the grid has `steps() + 1` nodes.
    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn num_nodes(&self) -> usize {
        self.m + 1
    }

    pub fn step(&self) -> f64 {
        (self.t1 - self.t0) / self.m as f64
    }

    /// Node `t_j`; computed so that `node(m) == t1` exactly.
    pub fn node(&self, j: usize) -> f64 {
        self.t0 + (self.t1 - self.t0) * (j as f64 / self.m as f64)
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.m).map(move |j| self.node(j))
    }

    /// Index of the step containing `t` (clamped to `[0, m-1]`).
    pub fn step_index(&self, t: f64) -> usize {
        let raw = ((t - self.t0) / self.step()).floor();
        (raw.max(0.0) as usize).min(self.m - 1)
    }
}

/// Grid-sampled state path with piecewise-linear interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    states: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, states: Vec<DVector<f64>>) -> Result<Self> {
        if states.len() != grid.num_nodes() {
            return Err(Error::Input(format!(
                "trajectory has {} samples, grid has {} nodes",
                states.len(),
                grid.num_nodes()
            )));
        }
        let n = states[0].len();
        if states.iter().any(|x| x.len() != n) {
            return Err(Error::Input("trajectory samples of mixed dimension".into()));
        }
        Ok(Trajectory { grid, states })
    }

    /// Builds a trajectory by evaluating `f` at every node.
    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Self {
        let states = grid.nodes().map(f).collect();
        Trajectory { grid, states }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.states[0].len()
    }

    pub fn state(&self, j: usize) -> &DVector<f64> {
        &self.states[j]
    }

    pub fn states(&self) -> &[DVector<f64>] {
        &self.states
    }

    pub fn first(&self) -> &DVector<f64> {
        &self.states[0]
    }

    pub fn last(&self) -> &DVector<f64> {
        &self.states[self.states.len() - 1]
    }

    /// Piecewise-linear interpolation, clamped to the grid interval.
    pub fn value_at(&self, t: f64) -> DVector<f64> {
        let j = self.grid.step_index(t);
        let tj = self.grid.node(j);
        let theta = ((t - tj) / self.grid.step()).clamp(0.0, 1.0);
        &self.states[j] * (1.0 - theta) + &self.states[j + 1] * theta
    }

    /// Componentwise sup over this trajectory's nodes of `|self - other|`,
    /// with `other` interpolated; returns the max over components.
    pub fn sup_deviation(&self, other: &Trajectory) -> f64 {
        let mut sup: f64 = 0.0;
        for (j, t) in self.grid.nodes().enumerate() {
            let diff = &self.states[j] - other.value_at(t);
            sup = sup.max(diff.amax());
        }
        sup
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write_path_csv(out, "x", &self.grid, self.dim(), |j, c| self.states[j][c])
    }

    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let (grid, rows) = read_path_csv(input, "x")?;
        Trajectory::new(grid, rows.into_iter().map(DVector::from_vec).collect())
    }
}

/// Grid-sampled covector path `p(t) ∈ (R^n)^*`.
#[derive(Debug, Clone, PartialEq)]
pub struct AdjointTrajectory {
    grid: TimeGrid,
    covectors: Vec<RowDVector<f64>>,
}

impl AdjointTrajectory {
    pub fn new(grid: TimeGrid, covectors: Vec<RowDVector<f64>>) -> Result<Self> {
        if covectors.len() != grid.num_nodes() {
            return Err(Error::Input(format!(
                "adjoint path has {} samples, grid has {} nodes",
                covectors.len(),
                grid.num_nodes()
            )));
        }
        Ok(AdjointTrajectory { grid, covectors })
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.covectors[0].len()
    }

    pub fn covector(&self, j: usize) -> &RowDVector<f64> {
        &self.covectors[j]
    }

    pub fn covectors(&self) -> &[RowDVector<f64>] {
        &self.covectors
    }

    pub fn first(&self) -> &RowDVector<f64> {
        &self.covectors[0]
    }

    pub fn last(&self) -> &RowDVector<f64> {
        &self.covectors[self.covectors.len() - 1]
    }

    pub fn scale(&mut self, c: f64) {
        for p in &mut self.covectors {
            *p *= c;
        }
    }

    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        write_path_csv(out, "p", &self.grid, self.dim(), |j, c| {
            self.covectors[j][c]
        })
    }
}

/// Piecewise-constant control signal: `samples[j]` is held on `[t_j, t_{j+1})`.
/// The sample at the final node is kept for completeness but never drives a step.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSignal {
    grid: TimeGrid,
    samples: Vec<DVector<f64>>,
}

impl ControlSignal {
    pub fn new(grid: TimeGrid, samples: Vec<DVector<f64>>) -> Result<Self> {
        if samples.len() != grid.num_nodes() {
            return Err(Error::Input(format!(
                "control signal has {} samples, grid has {} nodes",
                samples.len(),
                grid.num_nodes()
            )));
        }
        Ok(ControlSignal { grid, samples })
    }

    pub fn from_fn(grid: TimeGrid, f: impl Fn(f64) -> DVector<f64>) -> Self {
        let samples = grid.nodes().map(f).collect();
        ControlSignal { grid, samples }
    }

    pub fn constant(grid: TimeGrid, value: DVector<f64>) -> Self {
        let samples = vec![value; grid.num_nodes()];
        ControlSignal { grid, samples }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.samples[0].len()
    }

    pub fn sample(&self, j: usize) -> &DVector<f64> {
        &self.samples[j]
    }

    pub fn samples(&self) -> &[DVector<f64>] {
        &self.samples
    }
}

fn check_finite(x: &DVector<f64>, step: usize) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Divergence { step })
    }
}

fn rk4_step<F: Fn(f64, &DVector<f64>) -> DVector<f64>>(
    f: &F,
    t: f64,
    x: &DVector<f64>,
    h: f64,
) -> DVector<f64> {
    let k1 = f(t, x);
    let k2 = f(t + 0.5 * h, &(x + &k1 * (0.5 * h)));
    let k3 = f(t + 0.5 * h, &(x + &k2 * (0.5 * h)));
    let k4 = f(t + h, &(x + &k3 * h));
    x + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Classical fixed-step RK4 for `ẋ = φ(t, x, u(t))` with the control held
/// constant across each step's internal stages.
pub fn integrate_state(
    problem: &ControlProblem,
    control: &ControlSignal,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Input("initial state is not finite".into()));
    }
    for (j, u) in control.samples().iter().enumerate() {
        if !problem.control_set.contains(u, 1e-9) {
            return Err(Error::Input(format!(
                "control sample at node {j} lies outside the control set"
            )));
        }
    }
    let grid = *control.grid();
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.num_nodes());
    states.push(x0.clone());
    for j in 0..grid.steps() {
        let u = control.sample(j);
        let f = |t: f64, x: &DVector<f64>| problem.eval_dynamics(t, x, u);
        let next = rk4_step(&f, grid.node(j), &states[j], h);
        check_finite(&next, j)?;
        states.push(next);
    }
    Trajectory::new(grid, states)
}

/// RK4 on the convex-combination right-hand side
/// `ẋ = Σ_i α_i(t) φ(t, x, u_i(t))`, with weights and vertex controls held
/// per step. With `k = 1`, `α ≡ 1` this reproduces [`integrate_state`]
/// bitwise on the same grid.
pub fn integrate_relaxed_state(
    problem: &ControlProblem,
    rc: &RelaxedControl,
    x0: &DVector<f64>,
) -> Result<Trajectory> {
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::Input("initial state is not finite".into()));
    }
    let grid = *rc.grid();
    let h = grid.step();
    let mut states = Vec::with_capacity(grid.num_nodes());
    states.push(x0.clone());
    for j in 0..grid.steps() {
        let f = |t: f64, x: &DVector<f64>| relaxed_rhs(problem, rc, j, t, x);
        let next = rk4_step(&f, grid.node(j), &states[j], h);
        check_finite(&next, j)?;
        states.push(next);
    }
    Trajectory::new(grid, states)
}

/// Relaxed right-hand side with the node-`j` samples of `rc`.
pub fn relaxed_rhs(
    problem: &ControlProblem,
    rc: &RelaxedControl,
    j: usize,
    t: f64,
    x: &DVector<f64>,
) -> DVector<f64> {
    let mut acc = problem.eval_dynamics(t, x, rc.vertex(0, j)) * rc.weight(0, j);
    for i in 1..rc.k() {
        acc += problem.eval_dynamics(t, x, rc.vertex(i, j)) * rc.weight(i, j);
    }
    acc
}

/// Weighted Jacobian `Σ_i α_i(t_j) φ_x(t, x, u_i(t_j))`.
pub fn relaxed_jacobian(
    problem: &ControlProblem,
    rc: &RelaxedControl,
    j: usize,
    t: f64,
    x: &DVector<f64>,
) -> nalgebra::DMatrix<f64> {
    let mut acc = problem.eval_dynamics_jac_x(t, x, rc.vertex(0, j)) * rc.weight(0, j);
    for i in 1..rc.k() {
        acc += problem.eval_dynamics_jac_x(t, x, rc.vertex(i, j)) * rc.weight(i, j);
    }
    acc
}

/// Backward RK4 from `t1` to `t0` on the stationarity equation
/// `ṗ = -p Σ_i α_i(t) φ_x(t, x̂(t), u_i(t))`, with `x̂` interpolated at
/// internal stages and the relaxed-control samples of the step's left node
/// held across the step.
pub fn integrate_adjoint_backward(
    problem: &ControlProblem,
    traj: &Trajectory,
    rc: &RelaxedControl,
    p_terminal: &RowDVector<f64>,
) -> Result<AdjointTrajectory> {
    if traj.grid() != rc.grid() {
        return Err(Error::GridMismatch(
            "trajectory and relaxed control use different grids".into(),
        ));
    }
    let grid = *traj.grid();
    let h = grid.step();
    let mut covectors = vec![RowDVector::zeros(traj.dim()); grid.num_nodes()];
    covectors[grid.steps()] = p_terminal.clone();
    for j in (0..grid.steps()).rev() {
        let g = |t: f64, p: &RowDVector<f64>| {
            -(p * relaxed_jacobian(problem, rc, j, t, &traj.value_at(t)))
        };
        let t_right = grid.node(j + 1);
        let p = &covectors[j + 1];
        let k1 = g(t_right, p);
        let k2 = g(t_right - 0.5 * h, &(p - &k1 * (0.5 * h)));
        let k3 = g(t_right - 0.5 * h, &(p - &k2 * (0.5 * h)));
        let k4 = g(t_right - h, &(p - &k3 * h));
        let prev = p - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        if !prev.iter().all(|v| v.is_finite()) {
            return Err(Error::Divergence { step: j });
        }
        covectors[j] = prev;
    }
    AdjointTrajectory::new(grid, covectors)
}

fn write_path_csv<W: Write>(
    out: &mut W,
    prefix: &str,
    grid: &TimeGrid,
    dim: usize,
    value: impl Fn(usize, usize) -> f64,
) -> Result<()> {
    let mut header = String::from("t");
    for c in 1..=dim {
        header.push_str(&format!(",{prefix}_{c}"));
    }
    writeln!(out, "{header}")?;
    for (j, t) in grid.nodes().enumerate() {
        let mut line = format!("{t}");
        for c in 0..dim {
            line.push_str(&format!(",{}", value(j, c)));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

fn read_path_csv<R: BufRead>(input: R, prefix: &str) -> Result<(TimeGrid, Vec<Vec<f64>>)> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Input("empty csv".into()))??;
    let cols: Vec<&str> = header.trim().split(',').collect();
    if cols.first() != Some(&"t") || cols.len() < 2 {
        return Err(Error::Input(format!(
            "csv header must start with t,{prefix}_1,..."
        )));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim().split(',').collect();
        if fields.len() != dim + 1 {
            return Err(Error::Input(format!(
                "csv row {} has {} fields, expected {}",
                lineno + 2,
                fields.len(),
                dim + 1
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::Input(format!("bad number {s:?} on row {}", lineno + 2)))
        };
        times.push(parse(fields[0])?);
        rows.push(fields[1..].iter().map(|s| parse(s)).collect::<Result<_>>()?);
    }
    let grid = grid_from_times(&times)?;
    Ok((grid, rows))
}

/// Reconstructs a uniform grid from a sampled time column.
pub fn grid_from_times(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 2 {
        return Err(Error::Input("need at least two time samples".into()));
    }
    let m = times.len() - 1;
    let grid = TimeGrid::new(times[0], times[m], m)?;
    let h = grid.step();
    for (j, &t) in times.iter().enumerate() {
        if (t - grid.node(j)).abs() > 1e-9 * (1.0 + h.abs()) {
            return Err(Error::Input(format!(
                "time column is not uniform at row {}",
                j + 1
            )));
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::{ControlProblem, ControlSet};
    use approx::assert_abs_diff_eq;
    use nalgebra::{dvector, DMatrix};

    fn scalar_problem(
        dynamics: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
        jac: impl Fn(f64, f64, f64) -> f64 + Send + Sync + 'static,
    ) -> ControlProblem {
        ControlProblem::builder(0.0, 1.0, 1, 1)
            .dynamics(move |t, x, u| dvector![dynamics(t, x[0], u[0])])
            .dynamics_jac_x(move |t, x, u| DMatrix::from_element(1, 1, jac(t, x[0], u[0])))
            .cost(|_z1, z2| z2[0], |_z1, _z2| {
                (RowDVector::zeros(1), RowDVector::from_row_slice(&[1.0]))
            })
            .control_set(ControlSet::interval_box(&[-10.0], &[10.0]))
            .build()
            .unwrap()
    }

    #[test]
    fn constant_control_is_exact() {
        // dyadic step so the accumulated sum is bit-exact
        let p = scalar_problem(|_, _, u| u, |_, _, _| 0.0);
        let grid = TimeGrid::new(0.0, 1.0, 8).unwrap();
        let sig = ControlSignal::constant(grid, dvector![1.0]);
        let traj = integrate_state(&p, &sig, &dvector![0.0]).unwrap();
        assert_eq!(traj.last()[0], 1.0);
    }

    #[test]
    fn rk4_matches_exponential() {
        let p = scalar_problem(|_, x, _| x, |_, _, _| 1.0);
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let sig = ControlSignal::constant(grid, dvector![0.0]);
        let traj = integrate_state(&p, &sig, &dvector![1.0]).unwrap();
        assert!((traj.last()[0] - std::f64::consts::E).abs() <= 1e-8);
    }

    #[test]
    fn rk4_is_fourth_order() {
        let p = scalar_problem(|_, x, _| x, |_, _, _| 1.0);
        let err = |m: usize| {
            let grid = TimeGrid::new(0.0, 1.0, m).unwrap();
            let sig = ControlSignal::constant(grid, dvector![0.0]);
            let traj = integrate_state(&p, &sig, &dvector![1.0]).unwrap();
            (traj.last()[0] - std::f64::consts::E).abs()
        };
        let ratio = err(50) / err(100);
        assert!(
            (8.0..=32.0).contains(&ratio),
            "halving h should cut the error ~16x, got ratio {ratio}"
        );
    }

    #[test]
    fn divergence_is_reported_with_step() {
        let p = scalar_problem(|_, x, _| x * x * x, |_, x, _| 3.0 * x * x);
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let sig = ControlSignal::constant(grid, dvector![0.0]);
        match integrate_state(&p, &sig, &dvector![5.0]) {
            Err(Error::Divergence { .. }) => {}
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn out_of_set_control_rejected() {
        let p = scalar_problem(|_, _, u| u, |_, _, _| 0.0);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let sig = ControlSignal::constant(grid, dvector![99.0]);
        assert!(matches!(
            integrate_state(&p, &sig, &dvector![0.0]),
            Err(Error::Input(_))
        ));
    }

    #[test]
    fn opposing_vertices_cancel() {
        // k = 2, û = (1, -1), α = (1/2, 1/2) on ẋ = u: the relaxed velocity
        // vanishes and the state never moves.
        let p = scalar_problem(|_, _, u| u, |_, _, _| 0.0);
        let grid = TimeGrid::new(0.0, 1.0, 25).unwrap();
        let rc = RelaxedControl::constant(
            grid,
            vec![dvector![1.0], dvector![-1.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let traj = integrate_relaxed_state(&p, &rc, &dvector![0.7]).unwrap();
        assert!(traj.states().iter().all(|x| x[0] == 0.7));
    }

    #[test]
    fn backward_adjoint_matches_linear_ode() {
        // ṗ = -p a with constant a: p(t0) = p(t1) e^{a (t1 - t0)}.
        let a = 1.3;
        let p = scalar_problem(move |_, x, _| a * x, move |_, _, _| a);
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let traj = Trajectory::from_fn(grid, |_| dvector![0.0]);
        let rc = RelaxedControl::constant(grid, vec![dvector![0.0]], vec![1.0]).unwrap();
        let adj =
            integrate_adjoint_backward(&p, &traj, &rc, &RowDVector::from_row_slice(&[1.0]))
                .unwrap();
        assert_abs_diff_eq!(adj.first()[0], a.exp(), epsilon = 1e-8);
    }

    #[test]
    fn adjoint_state_pairing_is_conserved() {
        // ẋ = A(t) x and ṗ = -p A(t) keep <p, x> constant; discretely the
        // defect stays below 1e-6 at M = 200.
        let a = |t: f64| {
            DMatrix::from_row_slice(2, 2, &[0.3 * t.sin(), 1.0, -1.0, -0.2 * t.cos()])
        };
        let aj = a;
        let p = ControlProblem::builder(0.0, 1.0, 2, 1)
            .dynamics(move |t, x, _| a(t) * x)
            .dynamics_jac_x(move |t, _, _| aj(t))
            .cost(|_z1, _z2| 0.0, |_z1, _z2| (RowDVector::zeros(2), RowDVector::zeros(2)))
            .control_set(ControlSet::interval_box(&[-1.0], &[1.0]))
            .build()
            .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 200).unwrap();
        let sig = ControlSignal::constant(grid, dvector![0.0]);
        let x = integrate_state(&p, &sig, &dvector![1.0, -0.5]).unwrap();
        let rc = RelaxedControl::constant(grid, vec![dvector![0.0]], vec![1.0]).unwrap();
        let adj =
            integrate_adjoint_backward(&p, &x, &rc, &RowDVector::from_row_slice(&[0.7, 0.4]))
                .unwrap();
        let pairing = |j: usize| {
            adj.covector(j)
                .iter()
                .zip(x.state(j).iter())
                .map(|(a, b)| a * b)
                .sum::<f64>()
        };
        let base = pairing(0);
        for j in 0..=200 {
            assert!(
                (pairing(j) - base).abs() <= 1e-6,
                "pairing drifted at node {j}"
            );
        }
    }

    #[test]
    fn trajectory_csv_roundtrip() {
        let grid = TimeGrid::new(0.0, 2.0, 5).unwrap();
        let traj = Trajectory::from_fn(grid, |t| dvector![t * t, 1.0 - t]);
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let back = Trajectory::read_csv(buf.as_slice()).unwrap();
        assert_eq!(traj, back);
    }
}
