//! Constructive approximation of relaxed trajectories by ordinary
//! admissible controls: time-slicing synthesis for arbitrary relaxed
//! controls, the exact broken-line construction for the tracking family,
//! and convergence measurement of the resulting sequences.

use nalgebra::DVector;

use crate::certificate::NormalityOutcome;
use crate::error::{Error, Result};
use crate::ode::{integrate_state, ControlSignal, TimeGrid, Trajectory};
use crate::problem::{ControlProblem, Example1, ScalarPath};
use crate::relaxed::RelaxedControl;

/// Gate for the approximating-sequence constructions: they are justified
/// when the certificate pipeline established normality, and may be forced
/// with an explicit override.
#[derive(Debug, Clone, Copy)]
pub enum NormalityGate {
    Checked(NormalityOutcome),
    Override,
}

impl NormalityGate {
    fn ensure(&self) -> Result<()> {
        match self {
            NormalityGate::Override => Ok(()),
            NormalityGate::Checked(NormalityOutcome::Normal) => Ok(()),
            NormalityGate::Checked(other) => Err(Error::Precondition(format!(
                "chattering synthesis requires a normal certificate \
                 (got {other:?}); pass the override flag to force it"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ChatterOptions {
    /// Refined steps per vertex per slab; the synthesis grid has
    /// `slabs * k * refine_q` steps, the broken line `slabs * refine_q`.
    pub refine_q: usize,
    /// Worker threads for the per-N loop (each N is independent).
    pub threads: usize,
}

impl Default for ChatterOptions {
    fn default() -> Self {
        ChatterOptions {
            refine_q: 16,
            threads: 1,
        }
    }
}

/// Converts a relaxed control into an ordinary piecewise-constant control:
/// the interval is split into `n_slabs` slabs; within each slab the weights
/// are averaged (and renormalized to the simplex), and each vertex `i` in
/// turn drives a sub-slab whose length is the weight share of the slab,
/// realized on the refined grid with at least one refined step per vertex.
pub fn synthesize(
    rc: &RelaxedControl,
    n_slabs: usize,
    refine_q: usize,
) -> Result<ControlSignal> {
    if n_slabs == 0 {
        return Err(Error::Input("need at least one slab".into()));
    }
    let q = refine_q.max(1);
    let k = rc.k();
    let coarse = rc.grid();
    let (t0, t1) = (coarse.t0(), coarse.t1());
    let steps_per_slab = k * q;
    let refined = TimeGrid::new(t0, t1, n_slabs * steps_per_slab)?;
    let slab_len = (t1 - t0) / n_slabs as f64;
    let mut samples: Vec<DVector<f64>> = Vec::with_capacity(refined.num_nodes());
    for s in 0..n_slabs {
        let lo = t0 + s as f64 * slab_len;
        let hi = lo + slab_len;
        let mid = 0.5 * (lo + hi);
        // slab-averaged weights over the coarse nodes inside the slab
        let mut avg = vec![0.0f64; k];
        let mut count = 0usize;
        for (j, t) in coarse.nodes().enumerate() {
            if t >= lo - 1e-12 && t <= hi + 1e-12 {
                for (i, a) in avg.iter_mut().enumerate() {
                    *a += rc.weight(i, j);
                }
                count += 1;
            }
        }
        let mid_node = coarse.step_index(mid);
        if count == 0 {
            for (i, a) in avg.iter_mut().enumerate() {
                *a = rc.weight(i, mid_node);
            }
        } else {
            for a in avg.iter_mut() {
                *a /= count as f64;
            }
        }
        for a in avg.iter_mut() {
            *a = a.max(0.0);
        }
        let total: f64 = avg.iter().sum();
        if total > 0.0 {
            for a in avg.iter_mut() {
                *a /= total;
            }
        } else {
            for a in avg.iter_mut() {
                *a = 1.0 / k as f64;
            }
        }
        // apportion refined steps by largest remainder, at least one each
        let mut counts: Vec<usize> = avg
            .iter()
            .map(|a| (a * steps_per_slab as f64).floor() as usize)
            .collect();
        let mut rest: Vec<(usize, f64)> = avg
            .iter()
            .enumerate()
            .map(|(i, a)| (i, a * steps_per_slab as f64 - counts[i] as f64))
            .collect();
        rest.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
        let mut deficit = steps_per_slab - counts.iter().sum::<usize>();
        for (i, _) in rest {
            if deficit == 0 {
                break;
            }
            counts[i] += 1;
            deficit -= 1;
        }
        for i in 0..k {
            while counts[i] == 0 {
                let donor = (0..k).max_by_key(|&j| counts[j]).unwrap();
                if counts[donor] <= 1 {
                    break;
                }
                counts[donor] -= 1;
                counts[i] += 1;
            }
        }
        for (i, &c) in counts.iter().enumerate() {
            let value = rc.vertex(i, mid_node).clone();
            for _ in 0..c {
                samples.push(value.clone());
            }
        }
    }
    let last = samples[samples.len() - 1].clone();
    samples.push(last);
    ControlSignal::new(refined, samples)
}

/// The exact broken line interpolating `f` at the slab boundaries with
/// slopes ±1: on slab `s = 0..N-1` over `[s/N, (s+1)/N]`,
/// `x(t) = t + b_s` up to the switch time `τ_s = (c_s - b_s)/2` and
/// `x(t) = -t + c_s` after it, where `b_s = f(s/N) - s/N` and
/// `c_s = f((s+1)/N) + (s+1)/N`.
#[derive(Debug)]
pub struct BrokenLine {
    pub n_slabs: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    tau: Vec<f64>,
    /// Refined uniform grid with the scalar path sampled on it.
    pub trajectory: Trajectory,
    /// Slope signal (±1) sampled step-midpoint-wise on the refined grid.
    pub control: ControlSignal,
}

impl BrokenLine {
    /// Exact evaluation of the broken line at any `t ∈ [0, 1]`.
    pub fn eval(&self, t: f64) -> f64 {
        let s = ((t * self.n_slabs as f64).floor() as usize).min(self.n_slabs - 1);
        if t <= self.tau[s] {
            t + self.b[s]
        } else {
            -t + self.c[s]
        }
    }

    /// Slope of the segment containing `t` (+1 before the slab's switch
    /// time, -1 after).
    pub fn slope(&self, t: f64) -> f64 {
        let s = ((t * self.n_slabs as f64).floor() as usize).min(self.n_slabs - 1);
        if t < self.tau[s] {
            1.0
        } else {
            -1.0
        }
    }

    pub fn switch_times(&self) -> &[f64] {
        &self.tau
    }
}

/// Builds the broken line for a tracked path on `[0, 1]`; fails when a
/// switch midpoint leaves its slab, which happens exactly when the path
/// moves faster than the admissible slopes over that slab.
pub fn example1_broken_line(f: &ScalarPath, n_slabs: usize, refine_q: usize) -> Result<BrokenLine> {
    if n_slabs == 0 {
        return Err(Error::Input("need at least one slab".into()));
    }
    let n = n_slabs as f64;
    let mut b = Vec::with_capacity(n_slabs);
    let mut c = Vec::with_capacity(n_slabs);
    let mut tau = Vec::with_capacity(n_slabs);
    for s in 0..n_slabs {
        let lo = s as f64 / n;
        let hi = (s + 1) as f64 / n;
        let bs = (f.value)(lo) - lo;
        let cs = (f.value)(hi) + hi;
        let ts = 0.5 * (cs - bs);
        if ts < lo - 1e-12 || ts > hi + 1e-12 {
            return Err(Error::Input(format!(
                "switch midpoint {ts} leaves slab {s} = [{lo}, {hi}]; \
                 the tracked path moves faster than slope 1 there"
            )));
        }
        b.push(bs);
        c.push(cs);
        tau.push(ts);
    }
    let q = refine_q.max(2);
    let grid = TimeGrid::new(0.0, 1.0, n_slabs * q)?;
    let partial = BrokenLine {
        n_slabs,
        b,
        c,
        tau,
        trajectory: Trajectory::from_fn(grid, |_| DVector::zeros(1)),
        control: ControlSignal::constant(grid, DVector::from_row_slice(&[1.0])),
    };
    for s in 0..=n_slabs {
        let t = s as f64 / n;
        let dev = (partial.eval(t) - (f.value)(t)).abs();
        if dev > 1e-12 {
            return Err(Error::Input(format!(
                "broken line fails to interpolate the path at t = {t} (deviation {dev:.3e})"
            )));
        }
    }
    let trajectory =
        Trajectory::from_fn(grid, |t| DVector::from_row_slice(&[partial.eval(t)]));
    let h = grid.step();
    let control = ControlSignal::from_fn(grid, |t| {
        // step-midpoint rule; the final node repeats the last step's slope
        let mid = if t < grid.t1() { t + 0.5 * h } else { t - 0.5 * h };
        DVector::from_row_slice(&[partial.slope(mid)])
    });
    Ok(BrokenLine {
        trajectory,
        control,
        ..partial
    })
}

/// Per-N record of an approximating sequence.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceRow {
    pub n: usize,
    /// Componentwise sup over the refined grid of `|x_N - x̂|`.
    pub sup_dev: f64,
    pub cost: f64,
    /// `|cost - J*|`.
    pub gap: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ConvergenceReport {
    pub j_star: f64,
    pub rows: Vec<ConvergenceRow>,
}

impl ConvergenceReport {
    pub fn gaps_monotone_nonincreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].gap <= w[0].gap + 1e-15)
    }

    pub fn final_gap(&self) -> f64 {
        self.rows.last().map_or(f64::NAN, |r| r.gap)
    }

    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "N,sup_dev,cost,gap")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.n, r.sup_dev, r.cost, r.gap)?;
        }
        Ok(())
    }
}

fn check_ns(ns: &[usize]) -> Result<()> {
    if ns.is_empty() {
        return Err(Error::Input("need at least one N".into()));
    }
    if ns.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Input("N values must be strictly increasing".into()));
    }
    if ns[0] == 0 {
        return Err(Error::Input("N values must be positive".into()));
    }
    Ok(())
}

/// Ordered parallel map over the N list; results keep input order and the
/// thread count is capped by `threads` (1 = serial).
fn par_map_ns<T: Send>(
    ns: &[usize],
    threads: usize,
    f: impl Fn(usize) -> Result<T> + Sync,
) -> Result<Vec<T>> {
    let workers = threads.max(1).min(ns.len());
    if workers <= 1 {
        return ns.iter().map(|&n| f(n)).collect();
    }
    let mut slots: Vec<Option<Result<T>>> = Vec::new();
    slots.resize_with(ns.len(), || None);
    let slots = std::sync::Mutex::new(slots);
    let next = std::sync::atomic::AtomicUsize::new(0);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, std::sync::atomic::Ordering::SeqCst);
                if idx >= ns.len() {
                    break;
                }
                let out = f(ns[idx]);
                slots.lock().unwrap()[idx] = Some(out);
            });
        }
    });
    slots
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|slot| slot.expect("worker filled every slot"))
        .collect()
}

/// Runs the generic synthesis for each N, integrates the full state from
/// `x̂(t0)`, and records sup-norm deviation and endpoint cost against `j_star`.
pub fn convergence_report(
    problem: &ControlProblem,
    x_hat: &Trajectory,
    rc: &RelaxedControl,
    ns: &[usize],
    j_star: f64,
    opts: &ChatterOptions,
    gate: NormalityGate,
) -> Result<ConvergenceReport> {
    gate.ensure()?;
    check_ns(ns)?;
    let rows = par_map_ns(ns, opts.threads, |n| {
        let signal = synthesize(rc, n, opts.refine_q)?;
        let x_n = integrate_state(problem, &signal, x_hat.first())?;
        let cost = problem.eval_cost(x_n.first(), x_n.last());
        Ok(ConvergenceRow {
            n,
            sup_dev: x_n.sup_deviation(x_hat),
            cost,
            gap: (cost - j_star).abs(),
        })
    })?;
    Ok(ConvergenceReport { j_star, rows })
}

/// Exact broken-line sequence for the tracking family: `x1` comes from the
/// closed-form construction, the running cost is accumulated by per-step
/// Simpson quadrature of the dynamics' second component (the integrand is
/// evaluated from the exact formula, not from the sampled grid).
pub fn example1_convergence_report(
    ex: &Example1,
    x_hat: &Trajectory,
    ns: &[usize],
    opts: &ChatterOptions,
    gate: NormalityGate,
) -> Result<ConvergenceReport> {
    gate.ensure()?;
    check_ns(ns)?;
    let j_star = ex.g_value(1.0);
    let rows = par_map_ns(ns, opts.threads, |n| {
        let bl = example1_broken_line(ex.f_path(), n, opts.refine_q)?;
        let grid = *bl.trajectory.grid();
        let h = grid.step();
        let integrand = |t: f64| {
            let x = DVector::from_row_slice(&[bl.eval(t), 0.0]);
            let u = DVector::from_row_slice(&[bl.slope(t)]);
            ex.problem.eval_dynamics(t, &x, &u)[1]
        };
        let mut x2 = Vec::with_capacity(grid.num_nodes());
        x2.push(0.0);
        for j in 0..grid.steps() {
            let (a, b) = (grid.node(j), grid.node(j + 1));
            let inc = h / 6.0 * (integrand(a) + 4.0 * integrand(0.5 * (a + b)) + integrand(b));
            x2.push(x2[j] + inc);
        }
        let cost = x2[grid.steps()] - x2[0];
        let full = Trajectory::new(
            grid,
            (0..grid.num_nodes())
                .map(|j| DVector::from_row_slice(&[bl.trajectory.state(j)[0], x2[j]]))
                .collect(),
        )?;
        Ok(ConvergenceRow {
            n,
            sup_dev: full.sup_deviation(x_hat),
            cost,
            gap: (cost - j_star).abs(),
        })
    })?;
    Ok(ConvergenceReport { j_star, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ode::integrate_relaxed_state;
    use crate::problem::{example1_problem, ControlSet, ScalarFn};
    use nalgebra::dvector;

    fn triangle_problem() -> ControlProblem {
        ControlProblem::builder(0.0, 1.0, 1, 1)
            .dynamics(|_t, _x, u| u.clone())
            .dynamics_jac_x(|_t, _x, _u| nalgebra::DMatrix::zeros(1, 1))
            .cost(|z1, z2| z2[0] - z1[0], |_z1, _z2| {
                (
                    nalgebra::RowDVector::from_row_slice(&[-1.0]),
                    nalgebra::RowDVector::from_row_slice(&[1.0]),
                )
            })
            .control_set(ControlSet::FiniteSet {
                points: vec![dvector![1.0], dvector![-1.0]],
            })
            .build()
            .unwrap()
    }

    #[test]
    fn single_vertex_synthesis_is_midpoint_sampling() {
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let rc = RelaxedControl::new(
            grid,
            vec![grid.nodes().map(|t| dvector![t]).collect()],
            vec![vec![1.0; grid.num_nodes()]],
        )
        .unwrap();
        let sig = synthesize(&rc, 4, 8).unwrap();
        assert_eq!(sig.grid().steps(), 4 * 8);
        // every sample within a slab equals the vertex value at the slab midpoint
        for (j, t) in sig.grid().nodes().enumerate().take(sig.grid().steps()) {
            let slab = (t * 4.0).floor().min(3.0);
            let mid = (slab + 0.5) / 4.0;
            let expect = grid.node(grid.step_index(mid));
            assert_eq!(sig.sample(j)[0], expect);
        }
    }

    #[test]
    fn triangle_wave_deviation_is_half_slab() {
        // k = 2, û = (1, -1), α̂ = (1/2, 1/2), ẋ = u, x̂ ≡ 0: each slab rises
        // for half its length and falls back, so the sup deviation is
        // exactly half a slab length, 1/(2N).
        let p = triangle_problem();
        let grid = TimeGrid::new(0.0, 1.0, 64).unwrap();
        let rc = RelaxedControl::constant(
            grid,
            vec![dvector![1.0], dvector![-1.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let x_hat = Trajectory::from_fn(grid, |_| dvector![0.0]);
        let report = convergence_report(
            &p,
            &x_hat,
            &rc,
            &[4, 8, 16, 32],
            0.0,
            &ChatterOptions::default(),
            NormalityGate::Override,
        )
        .unwrap();
        for row in &report.rows {
            assert_eq!(row.sup_dev, 1.0 / (2.0 * row.n as f64), "N = {}", row.n);
        }
        for w in report.rows.windows(2) {
            let ratio = w[1].sup_dev / w[0].sup_dev;
            assert!((0.3..=0.7).contains(&ratio));
        }
    }

    #[test]
    fn synthesized_controls_are_admissible_and_consistent() {
        let ex = example1_problem(
            ScalarPath::new(|t| 0.5 * t, |_| 0.5),
            ScalarFn::new(|u| u * u),
            2,
            10.0,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 128).unwrap();
        let (x_hat, rc) = ex.relaxed_candidate(grid, 0.0);
        let sig = synthesize(&rc, 8, 16).unwrap();
        // admissibility: integrate_state validates membership of every sample
        let x_n = integrate_state(&ex.problem, &sig, x_hat.first()).unwrap();
        // slab split at weights (3/4, 1/4): 24 steps of +1 then 8 of -1
        for j in 0..24 {
            assert_eq!(sig.sample(j)[0], 1.0);
        }
        for j in 24..32 {
            assert_eq!(sig.sample(j)[0], -1.0);
        }
        // deviation of x1 from f peaks at 3/8 of a slab: 3/(8N)
        let dev = x_n.sup_deviation(&x_hat);
        assert!((dev - 3.0 / (8.0 * 8.0)).abs() <= 1e-9, "dev = {dev}");
    }

    #[test]
    fn normality_gate_blocks_unverified_runs() {
        let p = triangle_problem();
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let rc = RelaxedControl::constant(
            grid,
            vec![dvector![1.0], dvector![-1.0]],
            vec![0.5, 0.5],
        )
        .unwrap();
        let x_hat = Trajectory::from_fn(grid, |_| dvector![0.0]);
        let err = convergence_report(
            &p,
            &x_hat,
            &rc,
            &[2, 4],
            0.0,
            &ChatterOptions::default(),
            NormalityGate::Checked(NormalityOutcome::NoCertificate),
        );
        assert!(matches!(err, Err(Error::Precondition(_))));
    }

    #[test]
    fn ns_must_increase() {
        let p = triangle_problem();
        let grid = TimeGrid::new(0.0, 1.0, 16).unwrap();
        let rc = RelaxedControl::constant(grid, vec![dvector![1.0]], vec![1.0]).unwrap();
        let x_hat = Trajectory::from_fn(grid, |t| dvector![t]);
        let err = convergence_report(
            &p,
            &x_hat,
            &rc,
            &[8, 4],
            0.0,
            &ChatterOptions::default(),
            NormalityGate::Override,
        );
        assert!(matches!(err, Err(Error::Input(_))));
    }

    #[test]
    fn broken_line_single_slab_case() {
        // f(t) = t/2, N = 1: b = 0, c = 3/2, switch at 3/4,
        // x = t before and -t + 3/2 after, x(1) = 1/2 = f(1).
        let f = ScalarPath::new(|t| 0.5 * t, |_| 0.5);
        let bl = example1_broken_line(&f, 1, 16).unwrap();
        assert_eq!(bl.switch_times(), &[0.75]);
        assert_eq!(bl.eval(0.5), 0.5);
        assert_eq!(bl.eval(0.75), 0.75);
        assert_eq!(bl.eval(1.0), 0.5);
        assert_eq!(bl.slope(0.1), 1.0);
        assert_eq!(bl.slope(0.9), -1.0);
    }

    #[test]
    fn broken_line_symmetric_triangle_for_zero_path() {
        let f = ScalarPath::new(|_| 0.0, |_| 0.0);
        for n in [1usize, 3, 8] {
            let bl = example1_broken_line(&f, n, 16).unwrap();
            for s in 0..n {
                let expect = (2 * s + 1) as f64 / (2.0 * n as f64);
                assert!((bl.switch_times()[s] - expect).abs() <= 1e-15);
                assert!((bl.eval(expect) - 1.0 / (2.0 * n as f64)).abs() <= 1e-15);
            }
            // endpoints are met exactly
            assert_eq!(bl.eval(0.0), 0.0);
            assert_eq!(bl.eval(1.0), 0.0);
        }
    }

    #[test]
    fn broken_line_interpolates_slab_boundaries() {
        let f = ScalarPath::new(|t| 0.5 * t, |_| 0.5);
        let bl = example1_broken_line(&f, 4, 16).unwrap();
        for s in 0..=4 {
            let t = s as f64 / 4.0;
            assert!((bl.eval(t) - s as f64 / 8.0).abs() <= 1e-15);
        }
        // slopes on the refined control are ±1 everywhere
        assert!(bl.control.samples().iter().all(|u| u[0].abs() == 1.0));
    }

    #[test]
    fn broken_line_rejects_fast_paths() {
        // average slope 1.2 > 1: the switch midpoint leaves every slab
        let f = ScalarPath::new(|t| 1.2 * t, |_| 1.2);
        match example1_broken_line(&f, 4, 16) {
            Err(Error::Input(msg)) => assert!(msg.contains("slab 0")),
            other => panic!("expected input error, got {other:?}"),
        }
    }

    #[test]
    fn example1_report_tracks_infimum() {
        let ex = example1_problem(
            ScalarPath::new(|t| 0.5 * t, |_| 0.5),
            ScalarFn::new(|u| u * u),
            2,
            10.0,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 500).unwrap();
        let (x_hat, _) = ex.relaxed_candidate(grid, 0.0);
        let report = example1_convergence_report(
            &ex,
            &x_hat,
            &[4, 16, 64],
            &ChatterOptions::default(),
            NormalityGate::Override,
        )
        .unwrap();
        assert_eq!(report.j_star, 1.0);
        for row in &report.rows {
            let nf = row.n as f64;
            assert!(row.gap <= 4.0 / (nf * nf), "gap {} at N = {}", row.gap, row.n);
            assert!(row.sup_dev <= 2.0 / nf);
        }
        assert!(report.gaps_monotone_nonincreasing());
    }

    #[test]
    fn generic_and_exact_constructions_agree_in_order() {
        // wiggly tracked path: both sequences converge at first order and
        // their deviations stay within a fixed ratio band
        let ex = example1_problem(
            crate::registry::scalar_path("quarter_sine").unwrap(),
            ScalarFn::new(|u| u * u),
            2,
            10.0,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 512).unwrap();
        let (x_hat, rc) = ex.relaxed_candidate(grid, 0.0);
        let opts = ChatterOptions::default();
        let generic = convergence_report(
            &ex.problem,
            &x_hat,
            &rc,
            &[4, 8, 16, 32],
            1.0,
            &opts,
            NormalityGate::Override,
        )
        .unwrap();
        let exact = example1_convergence_report(
            &ex,
            &x_hat,
            &[4, 8, 16, 32],
            &opts,
            NormalityGate::Override,
        )
        .unwrap();
        for (g, e) in generic.rows.iter().zip(exact.rows.iter()) {
            let ratio = g.sup_dev / e.sup_dev;
            assert!(
                (0.2..=5.0).contains(&ratio),
                "N = {}: generic {} vs exact {}",
                g.n,
                g.sup_dev,
                e.sup_dev
            );
        }
        // first-order convergence of the generic path
        for w in generic.rows.windows(2) {
            let ratio = w[1].sup_dev / w[0].sup_dev;
            assert!((0.3..=0.7).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn relaxed_integration_matches_candidate_velocity() {
        // the relaxed vector field reproduces ẋ1 = ḟ: x1 follows f itself
        let ex = example1_problem(
            ScalarPath::new(|t| 0.5 * t, |_| 0.5),
            ScalarFn::new(|u| u * u),
            2,
            10.0,
        )
        .unwrap();
        let grid = TimeGrid::new(0.0, 1.0, 100).unwrap();
        let (_, rc) = ex.relaxed_candidate(grid, 0.0);
        let x = integrate_relaxed_state(&ex.problem, &rc, &dvector![0.0, 0.0]).unwrap();
        for (j, t) in grid.nodes().enumerate() {
            assert!((x.state(j)[0] - 0.5 * t).abs() <= 1e-10);
            assert!((x.state(j)[1] - t).abs() <= 1e-10);
        }
    }
}
