//! Optimal control problems with endpoint inequality/equality constraints,
//! control sets, and the built-in example families.
//!
//! A problem is the data
//! `f0(x(t0), x(t1)) -> min`, `ẋ = φ(t, x, u)`, `u(t) ∈ U`,
//! `f(x(t0), x(t1)) ≤ 0`, `g(x(t0), x(t1)) = 0`.
//! All evaluators are deterministic pure functions and safe to call
//! concurrently; derivatives may be supplied analytically or fall back to
//! central finite differences.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::calcvar::LagrangianProblem;
use crate::error::{Error, Result};

pub type DynamicsFn = Box<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type DynamicsJacFn =
    Box<dyn Fn(f64, &DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync>;
pub type CostFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync>;
pub type CostGradFn =
    Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> (RowDVector<f64>, RowDVector<f64>) + Send + Sync>;
pub type EndpointFn = Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type EndpointJacFn =
    Box<dyn Fn(&DVector<f64>, &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>) + Send + Sync>;
pub type MembershipFn = Arc<dyn Fn(&DVector<f64>) -> bool + Send + Sync>;

/// Admissible control values `U ⊂ R^r`.
pub enum ControlSet {
    /// Coordinate box `[lo_1, hi_1] × ... × [lo_r, hi_r]`.
    Box { lo: DVector<f64>, hi: DVector<f64> },
    /// Finite list of admissible points.
    FiniteSet { points: Vec<DVector<f64>> },
    /// Union of closed intervals, scalar controls only.
    UnionOfIntervals { intervals: Vec<(f64, f64)> },
    /// Membership test plus an explicit maximization sample grid.
    Oracle {
        membership: MembershipFn,
        sample_grid: Vec<DVector<f64>>,
    },
}

impl fmt::Debug for ControlSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlSet::Box { lo, hi } => write!(f, "Box({lo:?}, {hi:?})"),
            ControlSet::FiniteSet { points } => write!(f, "FiniteSet({} points)", points.len()),
            ControlSet::UnionOfIntervals { intervals } => {
                write!(f, "UnionOfIntervals({intervals:?})")
            }
            ControlSet::Oracle { sample_grid, .. } => {
                write!(f, "Oracle({} grid points)", sample_grid.len())
            }
        }
    }
}

impl ControlSet {
    pub fn interval_box(lo: &[f64], hi: &[f64]) -> Self {
        ControlSet::Box {
            lo: DVector::from_row_slice(lo),
            hi: DVector::from_row_slice(hi),
        }
    }

    /// The truncated set `{u : 1 ≤ |u| ≤ bound}` used by the first built-in
    /// family; `bound` makes grid maximization finite and is user-visible so
    /// soundness can be probed by increasing it.
    pub fn magnitude_at_least_one(bound: f64) -> Result<Self> {
        if !bound.is_finite() || bound <= 1.0 {
            return Err(Error::Input(format!(
                "truncation bound must exceed 1, got {bound}"
            )));
        }
        Ok(ControlSet::UnionOfIntervals {
            intervals: vec![(-bound, -1.0), (1.0, bound)],
        })
    }

    pub fn dim(&self) -> usize {
        match self {
            ControlSet::Box { lo, .. } => lo.len(),
            ControlSet::FiniteSet { points } => points.first().map_or(0, |p| p.len()),
            ControlSet::UnionOfIntervals { .. } => 1,
            ControlSet::Oracle { sample_grid, .. } => {
                sample_grid.first().map_or(0, |p| p.len())
            }
        }
    }

    pub fn contains(&self, u: &DVector<f64>, tol: f64) -> bool {
        match self {
            ControlSet::Box { lo, hi } => (0..lo.len())
                .all(|c| u[c] >= lo[c] - tol && u[c] <= hi[c] + tol),
            ControlSet::FiniteSet { points } => {
                points.iter().any(|p| (p - u).amax() <= tol)
            }
            ControlSet::UnionOfIntervals { intervals } => intervals
                .iter()
                .any(|&(a, b)| u[0] >= a - tol && u[0] <= b + tol),
            ControlSet::Oracle { membership, .. } => membership(u),
        }
    }

    /// True when every maximization-grid point passes the membership test;
    /// holds by construction for the closed variants and checks the
    /// user-supplied data of an [`ControlSet::Oracle`].
    pub fn grid_consistent(&self, points_per_component: usize, tol: f64) -> bool {
        self.maximization_grid(points_per_component)
            .iter()
            .all(|u| self.contains(u, tol))
    }

    /// Sample grid for evaluating `max_{u ∈ U}` pointwise conditions.
    ///
    /// `points_per_component` is applied per interval (scalar unions) or per
    /// coordinate (boxes, as a cartesian product). Every returned point
    /// satisfies [`ControlSet::contains`].
    pub fn maximization_grid(&self, points_per_component: usize) -> Vec<DVector<f64>> {
        let q = points_per_component.max(2);
        match self {
            ControlSet::Box { lo, hi } => {
                let axes: Vec<Vec<f64>> = (0..lo.len())
                    .map(|c| linspace(lo[c], hi[c], q))
                    .collect();
                cartesian(&axes)
            }
            ControlSet::FiniteSet { points } => points.clone(),
            ControlSet::UnionOfIntervals { intervals } => intervals
                .iter()
                .flat_map(|&(a, b)| linspace(a, b, q))
                .map(|v| DVector::from_row_slice(&[v]))
                .collect(),
            ControlSet::Oracle { sample_grid, .. } => sample_grid.clone(),
        }
    }
}

fn linspace(a: f64, b: f64, q: usize) -> Vec<f64> {
    (0..q)
        .map(|i| a + (b - a) * (i as f64 / (q - 1) as f64))
        .collect()
}

fn cartesian(axes: &[Vec<f64>]) -> Vec<DVector<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(out.len() * axis.len());
        for partial in &out {
            for &v in axis {
                let mut p = partial.clone();
                p.push(v);
                next.push(p);
            }
        }
        out = next;
    }
    out.into_iter().map(DVector::from_vec).collect()
}

/// Optimal control problem data. Construct with [`ControlProblem::builder`].
pub struct ControlProblem {
    pub t0: f64,
    pub t1: f64,
    /// State dimension.
    pub n: usize,
    /// Control dimension.
    pub r: usize,
    /// Endpoint inequality count.
    pub m1: usize,
    /// Endpoint equality count.
    pub m2: usize,
    dynamics: DynamicsFn,
    dynamics_jac_x: Option<DynamicsJacFn>,
    cost: CostFn,
    cost_grad: Option<CostGradFn>,
    ineq: Option<EndpointFn>,
    ineq_jac: Option<EndpointJacFn>,
    eq: Option<EndpointFn>,
    eq_jac: Option<EndpointJacFn>,
    pub control_set: ControlSet,
}

impl fmt::Debug for ControlProblem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "ControlProblem {{ t: [{}, {}], n: {}, r: {}, m1: {}, m2: {}, U: {:?} }}",
            self.t0, self.t1, self.n, self.r, self.m1, self.m2, self.control_set
        )
    }
}

impl ControlProblem {
    pub fn builder(t0: f64, t1: f64, n: usize, r: usize) -> ControlProblemBuilder {
        ControlProblemBuilder {
            t0,
            t1,
            n,
            r,
            dynamics: None,
            dynamics_jac_x: None,
            cost: None,
            cost_grad: None,
            ineq: None,
            ineq_jac: None,
            ineq_count: 0,
            eq: None,
            eq_jac: None,
            eq_count: 0,
            control_set: None,
        }
    }

    pub fn eval_dynamics(&self, t: f64, x: &DVector<f64>, u: &DVector<f64>) -> DVector<f64> {
        (self.dynamics)(t, x, u)
    }

    /// Jacobian of the dynamics in `x`: analytic when supplied, central
    /// differences with step `1e-6 (1 + |x_k|)` otherwise.
    pub fn eval_dynamics_jac_x(
        &self,
        t: f64,
        x: &DVector<f64>,
        u: &DVector<f64>,
    ) -> DMatrix<f64> {
        match &self.dynamics_jac_x {
            Some(jac) => jac(t, x, u),
            None => fd_jacobian(|y| (self.dynamics)(t, y, u), x, FD_STEP),
        }
    }

    pub fn has_analytic_jac_x(&self) -> bool {
        self.dynamics_jac_x.is_some()
    }

    pub fn eval_cost(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> f64 {
        (self.cost)(z1, z2)
    }

    pub fn eval_cost_grad(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
    ) -> (RowDVector<f64>, RowDVector<f64>) {
        match &self.cost_grad {
            Some(grad) => grad(z1, z2),
            None => {
                let g1 = fd_gradient(|y| (self.cost)(y, z2), z1, FD_STEP);
                let g2 = fd_gradient(|y| (self.cost)(z1, y), z2, FD_STEP);
                (g1, g2)
            }
        }
    }

    pub fn has_analytic_cost_grad(&self) -> bool {
        self.cost_grad.is_some()
    }

    pub fn eval_ineq(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> DVector<f64> {
        match &self.ineq {
            Some(f) => f(z1, z2),
            None => DVector::zeros(0),
        }
    }

    pub fn eval_ineq_jac(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        if self.m1 == 0 {
            return (DMatrix::zeros(0, self.n), DMatrix::zeros(0, self.n));
        }
        match &self.ineq_jac {
            Some(jac) => jac(z1, z2),
            None => {
                let j1 = fd_jacobian(|y| self.eval_ineq(y, z2), z1, FD_STEP);
                let j2 = fd_jacobian(|y| self.eval_ineq(z1, y), z2, FD_STEP);
                (j1, j2)
            }
        }
    }

    pub fn has_analytic_ineq_jac(&self) -> bool {
        self.ineq_jac.is_some()
    }

    pub fn eval_eq(&self, z1: &DVector<f64>, z2: &DVector<f64>) -> DVector<f64> {
        match &self.eq {
            Some(f) => f(z1, z2),
            None => DVector::zeros(0),
        }
    }

    pub fn eval_eq_jac(
        &self,
        z1: &DVector<f64>,
        z2: &DVector<f64>,
    ) -> (DMatrix<f64>, DMatrix<f64>) {
        if self.m2 == 0 {
            return (DMatrix::zeros(0, self.n), DMatrix::zeros(0, self.n));
        }
        match &self.eq_jac {
            Some(jac) => jac(z1, z2),
            None => {
                let j1 = fd_jacobian(|y| self.eval_eq(y, z2), z1, FD_STEP);
                let j2 = fd_jacobian(|y| self.eval_eq(z1, y), z2, FD_STEP);
                (j1, j2)
            }
        }
    }

    pub fn has_analytic_eq_jac(&self) -> bool {
        self.eq_jac.is_some()
    }
}

pub struct ControlProblemBuilder {
    t0: f64,
    t1: f64,
    n: usize,
    r: usize,
    dynamics: Option<DynamicsFn>,
    dynamics_jac_x: Option<DynamicsJacFn>,
    cost: Option<CostFn>,
    cost_grad: Option<CostGradFn>,
    ineq: Option<EndpointFn>,
    ineq_jac: Option<EndpointJacFn>,
    ineq_count: usize,
    eq: Option<EndpointFn>,
    eq_jac: Option<EndpointJacFn>,
    eq_count: usize,
    control_set: Option<ControlSet>,
}

impl ControlProblemBuilder {
    pub fn dynamics(
        mut self,
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dynamics = Some(Box::new(f));
        self
    }

    pub fn dynamics_jac_x(
        mut self,
        f: impl Fn(f64, &DVector<f64>, &DVector<f64>) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.dynamics_jac_x = Some(Box::new(f));
        self
    }

    pub fn cost(
        mut self,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
        grad: impl Fn(&DVector<f64>, &DVector<f64>) -> (RowDVector<f64>, RowDVector<f64>)
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.cost = Some(Box::new(f));
        self.cost_grad = Some(Box::new(grad));
        self
    }

    pub fn cost_value_only(
        mut self,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> f64 + Send + Sync + 'static,
    ) -> Self {
        self.cost = Some(Box::new(f));
        self
    }

    pub fn ineq(
        mut self,
        m1: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>, &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>)
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.ineq = Some(Box::new(f));
        self.ineq_jac = Some(Box::new(jac));
        self.ineq_count = m1;
        self
    }

    pub fn eq(
        mut self,
        m2: usize,
        f: impl Fn(&DVector<f64>, &DVector<f64>) -> DVector<f64> + Send + Sync + 'static,
        jac: impl Fn(&DVector<f64>, &DVector<f64>) -> (DMatrix<f64>, DMatrix<f64>)
            + Send
            + Sync
            + 'static,
    ) -> Self {
        self.eq = Some(Box::new(f));
        self.eq_jac = Some(Box::new(jac));
        self.eq_count = m2;
        self
    }

    pub fn control_set(mut self, cs: ControlSet) -> Self {
        self.control_set = Some(cs);
        self
    }

    pub fn build(self) -> Result<ControlProblem> {
        if !(self.t0.is_finite() && self.t1.is_finite()) || self.t0 >= self.t1 {
            return Err(Error::Input("problem requires t0 < t1".into()));
        }
        let dynamics = self
            .dynamics
            .ok_or_else(|| Error::Input("problem needs dynamics".into()))?;
        let cost = self
            .cost
            .ok_or_else(|| Error::Input("problem needs a cost".into()))?;
        let control_set = self
            .control_set
            .ok_or_else(|| Error::Input("problem needs a control set".into()))?;
        if control_set.dim() != self.r {
            return Err(Error::Input(format!(
                "control set dimension {} does not match r = {}",
                control_set.dim(),
                self.r
            )));
        }
        Ok(ControlProblem {
            t0: self.t0,
            t1: self.t1,
            n: self.n,
            r: self.r,
            m1: self.ineq_count,
            m2: self.eq_count,
            dynamics,
            dynamics_jac_x: self.dynamics_jac_x,
            cost,
            cost_grad: self.cost_grad,
            ineq: self.ineq,
            ineq_jac: self.ineq_jac,
            eq: self.eq,
            eq_jac: self.eq_jac,
            control_set,
        })
    }
}

const FD_STEP: f64 = 1e-6;

fn coord_step(h: f64, v: f64) -> f64 {
    h * (1.0 + v.abs())
}

/// Central-difference Jacobian of a vector map, step `h (1 + |x_k|)` per
/// coordinate.
pub fn fd_jacobian(
    f: impl Fn(&DVector<f64>) -> DVector<f64>,
    x: &DVector<f64>,
    h: f64,
) -> DMatrix<f64> {
    let fx = f(x);
    let rows = fx.len();
    let mut jac = DMatrix::zeros(rows, x.len());
    for c in 0..x.len() {
        let hc = coord_step(h, x[c]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += hc;
        xm[c] -= hc;
        let col = (f(&xp) - f(&xm)) / (2.0 * hc);
        jac.set_column(c, &col);
    }
    jac
}

/// Central-difference gradient of a scalar map, returned as a covector.
pub fn fd_gradient(
    f: impl Fn(&DVector<f64>) -> f64,
    x: &DVector<f64>,
    h: f64,
) -> RowDVector<f64> {
    let mut grad = RowDVector::zeros(x.len());
    for c in 0..x.len() {
        let hc = coord_step(h, x[c]);
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[c] += hc;
        xm[c] -= hc;
        grad[c] = (f(&xp) - f(&xm)) / (2.0 * hc);
    }
    grad
}

/// One evaluation point for [`check_gradients`].
#[derive(Debug, Clone)]
pub struct GradCheckSample {
    pub t: f64,
    pub x: DVector<f64>,
    pub u: DVector<f64>,
    pub z1: DVector<f64>,
    pub z2: DVector<f64>,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckEntry {
    pub evaluator: String,
    /// Max over samples of the relative deviation between the provided
    /// derivative and central differences.
    pub max_rel_err: f64,
    /// False when the derivative is finite-difference-backed, in which case
    /// the comparison is skipped.
    pub provided: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct GradCheckReport {
    pub entries: Vec<GradCheckEntry>,
    pub tol: f64,
    pub pass: bool,
}

fn rel_err_matrix(provided: &DMatrix<f64>, fd: &DMatrix<f64>) -> f64 {
    (provided - fd).amax() / fd.amax().max(1.0)
}

fn finite_or_err(ok: bool, name: &str, idx: usize, t: f64) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Input(format!(
            "evaluator {name} returned a non-finite value at sample {idx} (t = {t})"
        )))
    }
}

/// Compares every analytically supplied derivative of `problem` against
/// central finite differences at the given samples. Guards the smoothness
/// hypotheses the necessary conditions rely on.
pub fn check_gradients(
    problem: &ControlProblem,
    samples: &[GradCheckSample],
    h: f64,
    tol: f64,
) -> Result<GradCheckReport> {
    if samples.is_empty() {
        return Err(Error::Precondition("check_gradients needs samples".into()));
    }
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Precondition("check_gradients needs h > 0".into()));
    }
    let mut dyn_err: f64 = 0.0;
    let mut cost_err: f64 = 0.0;
    let mut ineq_err: f64 = 0.0;
    let mut eq_err: f64 = 0.0;
    for (idx, s) in samples.iter().enumerate() {
        if problem.has_analytic_jac_x() {
            let provided = problem.eval_dynamics_jac_x(s.t, &s.x, &s.u);
            finite_or_err(provided.iter().all(|v| v.is_finite()), "dynamics_jac_x", idx, s.t)?;
            let fd = fd_jacobian(|y| problem.eval_dynamics(s.t, y, &s.u), &s.x, h);
            finite_or_err(fd.iter().all(|v| v.is_finite()), "dynamics", idx, s.t)?;
            dyn_err = dyn_err.max(rel_err_matrix(&provided, &fd));
        }
        if problem.has_analytic_cost_grad() {
            let (g1, g2) = problem.eval_cost_grad(&s.z1, &s.z2);
            finite_or_err(
                g1.iter().chain(g2.iter()).all(|v| v.is_finite()),
                "cost_grad",
                idx,
                s.t,
            )?;
            let f1 = fd_gradient(|y| problem.eval_cost(y, &s.z2), &s.z1, h);
            let f2 = fd_gradient(|y| problem.eval_cost(&s.z1, y), &s.z2, h);
            let scale = f1.amax().max(f2.amax()).max(1.0);
            let err = ((&g1 - &f1).amax().max((&g2 - &f2).amax())) / scale;
            cost_err = cost_err.max(err);
        }
        if problem.m1 > 0 && problem.has_analytic_ineq_jac() {
            let (j1, j2) = problem.eval_ineq_jac(&s.z1, &s.z2);
            let f1 = fd_jacobian(|y| problem.eval_ineq(y, &s.z2), &s.z1, h);
            let f2 = fd_jacobian(|y| problem.eval_ineq(&s.z1, y), &s.z2, h);
            let scale = f1.amax().max(f2.amax()).max(1.0);
            ineq_err = ineq_err.max(((&j1 - &f1).amax().max((&j2 - &f2).amax())) / scale);
        }
        if problem.m2 > 0 && problem.has_analytic_eq_jac() {
            let (j1, j2) = problem.eval_eq_jac(&s.z1, &s.z2);
            let f1 = fd_jacobian(|y| problem.eval_eq(y, &s.z2), &s.z1, h);
            let f2 = fd_jacobian(|y| problem.eval_eq(&s.z1, y), &s.z2, h);
            let scale = f1.amax().max(f2.amax()).max(1.0);
            eq_err = eq_err.max(((&j1 - &f1).amax().max((&j2 - &f2).amax())) / scale);
        }
    }
    let mut entries = vec![
        GradCheckEntry {
            evaluator: "dynamics_jac_x".into(),
            max_rel_err: dyn_err,
            provided: problem.has_analytic_jac_x(),
        },
        GradCheckEntry {
            evaluator: "cost_grad".into(),
            max_rel_err: cost_err,
            provided: problem.has_analytic_cost_grad(),
        },
    ];
    if problem.m1 > 0 {
        entries.push(GradCheckEntry {
            evaluator: "ineq_jac".into(),
            max_rel_err: ineq_err,
            provided: problem.has_analytic_ineq_jac(),
        });
    }
    if problem.m2 > 0 {
        entries.push(GradCheckEntry {
            evaluator: "eq_jac".into(),
            max_rel_err: eq_err,
            provided: problem.has_analytic_eq_jac(),
        });
    }
    let pass = entries
        .iter()
        .filter(|e| e.provided)
        .all(|e| e.max_rel_err <= tol);
    Ok(GradCheckReport { entries, tol, pass })
}

/// Scalar path `t ↦ f(t)` supplied together with its derivative; the
/// derivative is required because weight decomposition and precondition
/// checks need `ḟ`.
pub struct ScalarPath {
    pub value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    pub deriv: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarPath {
    pub fn new(
        value: impl Fn(f64) -> f64 + Send + Sync + 'static,
        deriv: impl Fn(f64) -> f64 + Send + Sync + 'static,
    ) -> Self {
        ScalarPath {
            value: Box::new(value),
            deriv: Box::new(deriv),
        }
    }
}

/// Scalar control-cost term `u ↦ g(u)`.
pub struct ScalarFn {
    pub value: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(value: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ScalarFn {
            value: Box::new(value),
        }
    }
}

/// The Mayer-form tracking family on `[0, 1]`:
/// minimize `x2(1) - x2(0)` subject to
/// `ẋ1 = u`, `ẋ2 = (x1 - f(t))^m + g(u)`, `1 ≤ |u| ≤ B`,
/// `x1(0) = 0`, `x1(1) = f(1)`.
///
/// Its infimum `g(1)` is not attained by any admissible pair when `|ḟ| < 1`;
/// it is realized in the limit by chattering controls, which makes the
/// family the canonical benchmark for the relaxed certificates in this
/// crate.
pub struct Example1 {
    pub problem: ControlProblem,
    f: Arc<ScalarPath>,
    g: Arc<ScalarFn>,
    pub m: u32,
    pub bound: f64,
}

impl Example1 {
    pub fn f_value(&self, t: f64) -> f64 {
        (self.f.value)(t)
    }

    pub fn f_deriv(&self, t: f64) -> f64 {
        (self.f.deriv)(t)
    }

    pub fn g_value(&self, u: f64) -> f64 {
        (self.g.value)(u)
    }

    pub fn f_path(&self) -> &ScalarPath {
        &self.f
    }

    /// The sliding-regime candidate: `x̂1 = f + δ`, `x̂2 = (g(1) + δ^m) t`,
    /// vertex controls `(+1, -1)` with weights `((1 + ḟ)/2, (1 - ḟ)/2)`.
    /// `perturb` shifts `x̂1` by a constant δ (zero for the candidate proper).
    pub fn relaxed_candidate(
        &self,
        grid: crate::ode::TimeGrid,
        perturb: f64,
    ) -> (crate::ode::Trajectory, crate::relaxed::RelaxedControl) {
        let g1 = self.g_value(1.0);
        let rate = g1 + perturb.powi(self.m as i32);
        let traj = crate::ode::Trajectory::from_fn(grid, |t| {
            DVector::from_row_slice(&[self.f_value(t) + perturb, rate * t])
        });
        let nodes = grid.num_nodes();
        let mut vertices: Vec<Vec<DVector<f64>>> =
            (0..2).map(|_| Vec::with_capacity(nodes)).collect();
        let mut weights: Vec<Vec<f64>> = (0..2).map(|_| Vec::with_capacity(nodes)).collect();
        for t in grid.nodes() {
            let fd = self.f_deriv(t);
            vertices[0].push(DVector::from_row_slice(&[1.0]));
            vertices[1].push(DVector::from_row_slice(&[-1.0]));
            weights[0].push((1.0 + fd) / 2.0);
            weights[1].push((1.0 - fd) / 2.0);
        }
        let rc = crate::relaxed::RelaxedControl::new(grid, vertices, weights)
            .expect("candidate construction is shape-correct");
        (traj, rc)
    }
}

/// Builds the tracking family; see [`Example1`].
///
/// Requires `m` even and ≥ 2, `f(0) = 0`, `|ḟ| < 1` on a 1001-point check
/// grid, and `g(-1) = g(1)`.
pub fn example1_problem(
    f: ScalarPath,
    g: ScalarFn,
    m: u32,
    bound: f64,
) -> Result<Example1> {
    if m < 2 || !m.is_multiple_of(2) {
        return Err(Error::Precondition(format!(
            "m must be an even integer >= 2, got {m}"
        )));
    }
    let f0 = (f.value)(0.0);
    if f0.abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "f(0) must vanish, got {f0}"
        )));
    }
    for j in 0..=1000 {
        let t = j as f64 / 1000.0;
        let fd = (f.deriv)(t);
        if fd.is_nan() || fd.abs() >= 1.0 {
            return Err(Error::Precondition(format!(
                "|f'(t)| must stay below 1; violated at t = {t} with f'(t) = {fd}"
            )));
        }
    }
    let gm = (g.value)(-1.0);
    let gp = (g.value)(1.0);
    if (gm - gp).abs() > 1e-12 {
        return Err(Error::Precondition(format!(
            "g(-1) = {gm} must equal g(1) = {gp}"
        )));
    }
    let f = Arc::new(f);
    let g = Arc::new(g);
    let (fd, fg) = (Arc::clone(&f), Arc::clone(&g));
    let fj = Arc::clone(&f);
    let f1 = (f.value)(1.0);
    let mi = m as i32;
    let problem = ControlProblem::builder(0.0, 1.0, 2, 1)
        .dynamics(move |t, x, u| {
            let dev = x[0] - (fd.value)(t);
            DVector::from_row_slice(&[u[0], dev.powi(mi) + (fg.value)(u[0])])
        })
        .dynamics_jac_x(move |t, x, _u| {
            let dev = x[0] - (fj.value)(t);
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, mi as f64 * dev.powi(mi - 1), 0.0])
        })
        .cost(
            |z1, z2| z2[1] - z1[1],
            |_z1, _z2| {
                (
                    RowDVector::from_row_slice(&[0.0, -1.0]),
                    RowDVector::from_row_slice(&[0.0, 1.0]),
                )
            },
        )
        .eq(
            2,
            move |z1, z2| DVector::from_row_slice(&[z1[0], z2[0] - f1]),
            |_z1, _z2| {
                (
                    DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]),
                    DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 1.0, 0.0]),
                )
            },
        )
        .control_set(ControlSet::magnitude_at_least_one(bound)?)
        .build()?;
    Ok(Example1 {
        problem,
        f,
        g,
        m,
        bound,
    })
}

/// Fixed-endpoint variational problem on `[0, 1]` with `x(0) = x(1) = 0`
/// and an autonomous scalar Lagrangian.
pub fn example2_problem(l: crate::calcvar::LagrangianBundle) -> LagrangianProblem {
    LagrangianProblem::from_bundle(
        0.0,
        1.0,
        1,
        l,
        DVector::from_row_slice(&[0.0]),
        DVector::from_row_slice(&[0.0]),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dvector;

    fn linear_half() -> ScalarPath {
        ScalarPath::new(|t| 0.5 * t, |_| 0.5)
    }

    fn square() -> ScalarFn {
        ScalarFn::new(|u| u * u)
    }

    #[test]
    fn example1_accepts_valid_spec() {
        let ex = example1_problem(linear_half(), square(), 2, 10.0).unwrap();
        assert_eq!(ex.problem.n, 2);
        assert_eq!(ex.problem.m2, 2);
        assert_eq!(ex.problem.m1, 0);
        // α̂1 = (1 + ḟ)/2 = 3/4 at ḟ = 1/2.
        let grid = crate::ode::TimeGrid::new(0.0, 1.0, 4).unwrap();
        let (_, rc) = ex.relaxed_candidate(grid, 0.0);
        assert_eq!(rc.weight(0, 0), 0.75);
        assert_eq!(rc.weight(1, 0), 0.25);
    }

    #[test]
    fn example1_zero_f_is_valid_and_symmetric() {
        let ex = example1_problem(ScalarPath::new(|_| 0.0, |_| 0.0), square(), 2, 10.0).unwrap();
        let grid = crate::ode::TimeGrid::new(0.0, 1.0, 4).unwrap();
        let (_, rc) = ex.relaxed_candidate(grid, 0.0);
        assert_eq!(rc.weight(0, 2), 0.5);
        assert_eq!(rc.weight(1, 2), 0.5);
    }

    #[test]
    fn example1_rejects_unit_slope() {
        let err = example1_problem(ScalarPath::new(|t| t, |_| 1.0), square(), 2, 10.0);
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn example1_rejects_odd_power_and_offset_f() {
        assert!(example1_problem(linear_half(), square(), 3, 10.0).is_err());
        assert!(
            example1_problem(ScalarPath::new(|t| t + 0.5, |_| 1.0), square(), 2, 10.0).is_err()
        );
    }

    #[test]
    fn example1_dynamics_follow_f() {
        // Evaluating the dynamics at x1 = f(t), u = ḟ(t) gives ẋ1 = ḟ(t) exactly.
        let ex = example1_problem(linear_half(), square(), 2, 10.0).unwrap();
        for j in 0..=10 {
            let t = j as f64 / 10.0;
            let x = dvector![ex.f_value(t), 0.3];
            let u = dvector![ex.f_deriv(t)];
            let rhs = ex.problem.eval_dynamics(t, &x, &u);
            assert_eq!(rhs[0], ex.f_deriv(t));
        }
    }

    #[test]
    fn gradcheck_flags_exact_cases() {
        let ex = example1_problem(linear_half(), square(), 2, 10.0).unwrap();
        let samples = vec![GradCheckSample {
            t: 0.3,
            x: dvector![1.15, 0.2], // x1 - f(0.3) = 1 => dφ2/dx1 = 2
            u: dvector![1.5],
            z1: dvector![0.1, 0.2],
            z2: dvector![0.3, 0.4],
        }];
        let report = check_gradients(&ex.problem, &samples, 1e-5, 1e-5).unwrap();
        assert!(report.pass);
        let dyn_entry = &report.entries[0];
        assert!(dyn_entry.provided);
        assert!(dyn_entry.max_rel_err <= 1e-9, "quadratic jacobian should be near-exact");
        // eq is linear: central differences agree to rounding level
        let eq_entry = report.entries.iter().find(|e| e.evaluator == "eq_jac").unwrap();
        assert!(eq_entry.max_rel_err <= 1e-9);
    }

    #[test]
    fn gradcheck_zero_jacobian_case() {
        // φ(t, x, u) = u has φ_x ≡ 0: deviation is exactly zero.
        let p = ControlProblem::builder(0.0, 1.0, 1, 1)
            .dynamics(|_t, _x, u| u.clone())
            .dynamics_jac_x(|_t, _x, _u| DMatrix::zeros(1, 1))
            .cost(|_z1, z2| z2[0], |_z1, _z2| {
                (RowDVector::zeros(1), RowDVector::from_row_slice(&[1.0]))
            })
            .control_set(ControlSet::interval_box(&[-2.0], &[2.0]))
            .build()
            .unwrap();
        let samples = vec![GradCheckSample {
            t: 0.0,
            x: dvector![0.7],
            u: dvector![1.0],
            z1: dvector![0.0],
            z2: dvector![1.0],
        }];
        let report = check_gradients(&p, &samples, 1e-5, 1e-5).unwrap();
        assert_eq!(report.entries[0].max_rel_err, 0.0);
    }

    #[test]
    fn maximization_grid_points_are_members() {
        let cs = ControlSet::magnitude_at_least_one(10.0).unwrap();
        let grid = cs.maximization_grid(101);
        assert_eq!(grid.len(), 202);
        assert!(grid.iter().all(|u| cs.contains(u, 1e-12)));
        assert!(grid.iter().any(|u| u[0] == 1.0));
        assert!(grid.iter().any(|u| u[0] == -1.0));
        assert!(grid.iter().any(|u| u[0] == 10.0));
        // interior of (-1, 1) is excluded
        assert!(!cs.contains(&dvector![0.0], 1e-9));
    }

    #[test]
    fn box_grid_is_cartesian() {
        let cs = ControlSet::interval_box(&[0.0, -1.0], &[1.0, 1.0]);
        let grid = cs.maximization_grid(3);
        assert_eq!(grid.len(), 9);
        assert!(grid.iter().all(|u| cs.contains(u, 0.0)));
    }

    #[test]
    fn oracle_grid_consistency_reflects_its_data() {
        let annulus = |u: &DVector<f64>| {
            let r = u.norm();
            (0.5..=1.5).contains(&r)
        };
        let good = ControlSet::Oracle {
            membership: std::sync::Arc::new(annulus),
            sample_grid: vec![dvector![1.0, 0.0], dvector![0.0, -1.2]],
        };
        assert!(good.grid_consistent(0, 1e-9));
        let bad = ControlSet::Oracle {
            membership: std::sync::Arc::new(annulus),
            sample_grid: vec![dvector![1.0, 0.0], dvector![0.1, 0.0]],
        };
        assert!(!bad.grid_consistent(0, 1e-9));
        // closed variants are consistent by construction
        assert!(ControlSet::magnitude_at_least_one(10.0)
            .unwrap()
            .grid_consistent(101, 1e-12));
    }
}
