//! Checks the generalized Euler, Weierstrass, and Legendre conditions over
//! sliding-regime decompositions for scalar variational problems, and runs
//! the linearity falsifier on Lagrangians vanishing along the zero path.
//!
//! The headline case is L = x ẋ² with x̂ ≡ 0: it satisfies the classical
//! first-order conditions, yet the generalized Euler equation over the
//! decomposition û = (-1, 1), α̂ = (1/2, 1/2) fails, and the falsifier
//! exhibits the witness pair certifying that x̂ ≡ 0 is not a strong local
//! minimum.
//!
//!     cargo run --example variational_conditions

use nalgebra::dvector;
use relaxctl::calcvar::{
    generalized_euler_residual, legendre_check, linearity_falsifier, weierstrass_scan,
    FalsifierGrid, FalsifierOutcome, UGrid,
};
use relaxctl::ode::{TimeGrid, Trajectory};
use relaxctl::registry;
use relaxctl::relaxed::{node_velocities, RelaxedControl};

fn main() -> relaxctl::Result<()> {
    let grid = TimeGrid::new(0.0, 1.0, 500)?;
    let zero_path = Trajectory::from_fn(grid, |_| dvector![0.0]);
    let two_vertex = RelaxedControl::constant(
        grid,
        vec![dvector![-1.0], dvector![1.0]],
        vec![0.5, 0.5],
    )?;

    for name in ["x_udot_sq", "x_udot", "x_sin_udot"] {
        let lp = registry::lagrangian_problem(name, 0.0, 0.0)?;
        println!("== L = {name}, x̂ ≡ 0, û = (-1, 1), α̂ = (1/2, 1/2) ==");
        let euler = generalized_euler_residual(&lp, &zero_path, &two_vertex, 1e-9)?;
        println!("  generalized Euler sup residual: {:.6e}", euler.sup);
        let weier = weierstrass_scan(&lp, &zero_path, &two_vertex, &UGrid::default())?;
        println!("  Weierstrass min excess:         {:.6e}", weier.min_excess);
        let leg = legendre_check(&lp, &zero_path, &two_vertex)?;
        println!("  Legendre min eigenvalue:        {:.6e}", leg.min_eigenvalue);
        match linearity_falsifier(&lp, &FalsifierGrid::default(), 1e-9)? {
            FalsifierOutcome::Pass { max_residual } => {
                println!("  falsifier: pass (max residual {max_residual:.3e})")
            }
            FalsifierOutcome::Violation { u1, u2, residual } => println!(
                "  falsifier: VIOLATION at (u1, u2) = ({u1}, {u2}) with residual {residual:.6} \
                 -> x̂ ≡ 0 is not a strong local minimum"
            ),
        }
        println!();
    }

    // classical convex case: straight-line extremal of L = ẋ²
    let lp = registry::lagrangian_problem("udot_sq", 0.0, 1.0)?;
    let line = Trajectory::from_fn(grid, |t| dvector![t]);
    let classical = RelaxedControl::new(
        grid,
        vec![node_velocities(&line)],
        vec![vec![1.0; grid.num_nodes()]],
    )?;
    println!("== L = udot_sq, x̂ = t, classical embedding (k = 1) ==");
    let euler = generalized_euler_residual(&lp, &line, &classical, 1e-9)?;
    let weier = weierstrass_scan(&lp, &line, &classical, &UGrid::default())?;
    let leg = legendre_check(&lp, &line, &classical)?;
    println!(
        "  Euler sup {:.2e}, min excess {:.2e}, Legendre min eigenvalue {}",
        euler.sup, weier.min_excess, leg.min_eigenvalue
    );
    Ok(())
}
