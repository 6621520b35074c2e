//! Decomposes candidate velocities into convex combinations over vertex
//! controls — the entry ticket for the relaxed necessary conditions. Shows
//! pointwise decomposition (with and without the Lagrangian-matching row),
//! decomposition along a whole trajectory, and how infeasibility is
//! reported when the velocity leaves the convex hull.
//!
//!     cargo run --example decompose_sliding_regime

use nalgebra::dvector;
use relaxctl::ode::{TimeGrid, Trajectory};
use relaxctl::problem::{example1_problem, ScalarFn, ScalarPath};
use relaxctl::relaxed::{
    constant_vertex_signals, decompose_along_trajectory_control,
    decompose_along_trajectory_lagrangian, decompose_velocity, DecomposeOutcome,
};
use relaxctl::registry;

fn main() -> relaxctl::Result<()> {
    println!("== pointwise ==");
    let dec = decompose_velocity(&dvector![0.5], &[dvector![1.0], dvector![-1.0]], None, 1e-9);
    println!(
        "v = 1/2 over {{+1, -1}}: α = ({:.4}, {:.4}), residual {:.1e}",
        dec.alpha[0], dec.alpha[1], dec.velocity_residual
    );
    let dec = decompose_velocity(
        &dvector![0.2],
        &[dvector![1.0], dvector![-1.0], dvector![0.5]],
        Some((0.7, &[1.0, 1.0, 0.25])),
        1e-9,
    );
    println!(
        "v = 0.2 with value row 0.7: α = ({:.4}, {:.4}, {:.4}), residuals ({:.1e}, {:.1e})",
        dec.alpha[0], dec.alpha[1], dec.alpha[2], dec.velocity_residual, dec.aux_residual
    );
    let dec = decompose_velocity(&dvector![2.0], &[dvector![1.0], dvector![-1.0]], None, 1e-6);
    println!(
        "v = 2 over {{+1, -1}}: feasible = {}, best residual {:.3}",
        dec.feasible, dec.velocity_residual
    );

    println!("\n== along the tracking-family candidate ==");
    let ex = example1_problem(
        ScalarPath::new(|t| 0.5 * t, |_| 0.5),
        ScalarFn::new(|u| u * u),
        2,
        10.0,
    )?;
    let grid = TimeGrid::new(0.0, 1.0, 200)?;
    let x1 = Trajectory::from_fn(grid, |t| dvector![0.5 * t, t]);
    let signals = constant_vertex_signals(&grid, &[dvector![1.0], dvector![-1.0]]);
    match decompose_along_trajectory_control(&ex.problem, &x1, &signals, 1e-6)? {
        DecomposeOutcome::Feasible(rc) => println!(
            "x̂ = (t/2, t): feasible everywhere, α̂(t) ≡ ({:.4}, {:.4})",
            rc.weight(0, 0),
            rc.weight(1, 0)
        ),
        DecomposeOutcome::Infeasible(fails) => {
            println!("unexpectedly infeasible at {} nodes", fails.len())
        }
    }

    println!("\n== velocity leaving the hull ==");
    let parabola = Trajectory::from_fn(grid, |t| dvector![t * t]);
    let integrator = relaxctl::problem::ControlProblem::builder(0.0, 1.0, 1, 1)
        .dynamics(|_t, _x, u| u.clone())
        .dynamics_jac_x(|_t, _x, _u| nalgebra::DMatrix::zeros(1, 1))
        .cost(|_z1, z2| z2[0], |_z1, _z2| {
            (
                nalgebra::RowDVector::zeros(1),
                nalgebra::RowDVector::from_row_slice(&[1.0]),
            )
        })
        .control_set(relaxctl::problem::ControlSet::interval_box(&[-1.0], &[1.0]))
        .build()?;
    let signals = constant_vertex_signals(&grid, &[dvector![1.0], dvector![-1.0]]);
    match decompose_along_trajectory_control(&integrator, &parabola, &signals, 1e-6)? {
        DecomposeOutcome::Feasible(_) => println!("unexpectedly feasible"),
        DecomposeOutcome::Infeasible(fails) => {
            println!(
                "x̂ = t² over {{+1, -1}}: {} of {} nodes infeasible (velocity 2t leaves [-1, 1]); \
                 first at t = {:.3}, worst residual {:.3}",
                fails.len(),
                grid.num_nodes(),
                fails[0].t,
                fails
                    .iter()
                    .map(|f| f.velocity_residual)
                    .fold(0.0f64, f64::max)
            );
        }
    }

    println!("\n== value-matching row can rule decompositions out ==");
    // for L = ẋ² the pair (velocity, value) over {+1, -1} forces v² = 1;
    // a slower path is velocity-feasible yet value-infeasible
    let slow = Trajectory::from_fn(grid, |t| dvector![0.3 * t]);
    let lp = registry::lagrangian_problem("udot_sq", 0.0, 0.3)?;
    match decompose_along_trajectory_lagrangian(&lp, &slow, &signals, 1e-6)? {
        DecomposeOutcome::Feasible(_) => println!("unexpectedly feasible"),
        DecomposeOutcome::Infeasible(fails) => println!(
            "x̂ = 0.3 t over {{+1, -1}} with L = ẋ²: velocity row fits but the value row \
             (Σ α_i L(û_i) = 1 vs L(0.3) = 0.09) fails at every node ({} infeasible)",
            fails.len()
        ),
    }
    Ok(())
}
