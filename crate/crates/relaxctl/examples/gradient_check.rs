//! Validates analytically supplied derivatives against central finite
//! differences — the smoothness guard run before any certificate math.
//!
//!     cargo run --example gradient_check

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use relaxctl::calcvar::check_lagrangian_gradients;
use relaxctl::problem::{check_gradients, example1_problem, GradCheckSample, ScalarFn, ScalarPath};
use relaxctl::registry;

fn main() -> relaxctl::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0);

    let ex = example1_problem(
        ScalarPath::new(|t| 0.25 * (std::f64::consts::PI * t).sin(), |t| {
            0.25 * std::f64::consts::PI * (std::f64::consts::PI * t).cos()
        }),
        ScalarFn::new(|u| u.powi(4)),
        4,
        10.0,
    )?;
    let samples: Vec<GradCheckSample> = (0..100)
        .map(|_| GradCheckSample {
            t: rng.gen_range(0.0..1.0),
            x: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
            u: DVector::from_fn(1, |_, _| rng.gen_range(-3.0..3.0)),
            z1: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
            z2: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
        })
        .collect();
    let report = check_gradients(&ex.problem, &samples, 1e-6, 1e-5)?;
    println!("tracking family (quartic g, wiggly f), 100 random samples:");
    for e in &report.entries {
        println!(
            "  {:<16} {}",
            e.evaluator,
            if e.provided {
                format!("max relative deviation {:.3e}", e.max_rel_err)
            } else {
                "finite-difference backed (skipped)".to_string()
            }
        );
    }
    println!("  pass at tol {:.0e}: {}\n", report.tol, report.pass);

    for name in ["x_udot_sq", "x_sin_udot", "sq_minus_quartic"] {
        let lp = registry::lagrangian_problem(name, 0.0, 0.0)?;
        let pts: Vec<(f64, DVector<f64>, DVector<f64>)> = (0..100)
            .map(|_| {
                (
                    rng.gen_range(0.0..1.0),
                    DVector::from_fn(1, |_, _| rng.gen_range(-2.0..2.0)),
                    DVector::from_fn(1, |_, _| rng.gen_range(-2.0..2.0)),
                )
            })
            .collect();
        let report = check_lagrangian_gradients(&lp, &pts, 1e-6, 1e-5)?;
        let worst = report
            .entries
            .iter()
            .filter(|e| e.provided)
            .map(|e| e.max_rel_err)
            .fold(0.0f64, f64::max);
        println!("L = {name:<18} worst deviation {worst:.3e}  pass: {}", report.pass);
    }
    Ok(())
}
