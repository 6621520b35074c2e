//! Batch driver tying problems, certificates, chattering sequences, and
//! variational checks into reproducible runs.
//!
//! Exit-code contract: `0` when every requested check passes, `1` when a
//! mathematical check fails, `2` on malformed input. Reports embed the
//! config hash, grid size, and tolerance set; identical config and seed
//! produce byte-identical JSON.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::calcvar::{self, FalsifierOutcome, LagrangianProblem};
use crate::certificate::{certify, CertTolerances, NormalityOutcome, SolveOptions};
use crate::chattering::{
    convergence_report, example1_convergence_report, ChatterOptions, ConvergenceReport,
    NormalityGate,
};
use crate::config::{DecayBound, RunConfig};
use crate::error::{Error, Result};
use crate::ode::{TimeGrid, Trajectory};
use crate::problem::{check_gradients, example1_problem, Example1, GradCheckSample};
use crate::registry;
use crate::relaxed::{
    constant_vertex_signals, decompose_along_trajectory_lagrangian, node_velocities,
    DecomposeOutcome, RelaxedControl,
};
use crate::report::{
    CalcvarReport, CandidateSummary, CertifyReport, ChatterReport, EulerSummary,
    FalsifierSummary, FalsifierWitness, GradcheckReport, LegendreSummary, WeierstrassSummary,
    WitnessPoint,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Certify,
    Chatter,
    Calcvar,
    Gradcheck,
}

#[derive(Debug, Clone)]
pub struct CliOptions {
    pub config_path: PathBuf,
    pub out_dir: Option<PathBuf>,
    pub grid_override: Option<usize>,
    pub seed_override: Option<u64>,
    pub override_normality: bool,
}

/// Worker-thread cap from `RELAXCTL_THREADS` (default 1).
pub fn thread_cap() -> usize {
    std::env::var("RELAXCTL_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .map(|v| v.max(1))
        .unwrap_or(1)
}

/// Runs one command; returns the exit code and the JSON report that was
/// printed for it.
pub fn run(command: Command, opts: &CliOptions) -> Result<(u8, String)> {
    let bytes = fs::read(&opts.config_path)?;
    let (config, hash) = RunConfig::from_bytes(&bytes)?;
    if let Some(g) = opts.grid_override {
        if g < 10 {
            return Err(Error::Input(format!("grid must be at least 10, got {g}")));
        }
    }
    match command {
        Command::Certify => cmd_certify(&config, &hash, opts),
        Command::Chatter => cmd_chatter(&config, &hash, opts),
        Command::Calcvar => cmd_calcvar(&config, &hash, opts),
        Command::Gradcheck => cmd_gradcheck(&config, &hash, opts),
    }
}

fn effective_grid(config: &RunConfig, opts: &CliOptions) -> usize {
    opts.grid_override.unwrap_or(config.grid)
}

fn build_example1(config: &RunConfig) -> Result<Example1> {
    let p = &config.problem.params;
    let f = registry::scalar_path(p.f.as_deref().unwrap_or("linear_half"))?;
    let g = registry::control_cost(p.g.as_deref().unwrap_or("square"))?;
    example1_problem(f, g, p.m.unwrap_or(2), config.problem.control_bound)
}

fn build_lagrangian(config: &RunConfig) -> Result<LagrangianProblem> {
    let p = &config.problem.params;
    match config.problem.builtin.as_str() {
        "example2" => {
            let name = p.l.as_deref().unwrap_or("x_udot_sq");
            Ok(crate::problem::example2_problem(registry::lagrangian_bundle(
                name,
            )?))
        }
        "quadratic_cv" => registry::lagrangian_problem(
            p.l.as_deref().unwrap_or("udot_sq"),
            p.x0.unwrap_or(0.0),
            p.x1.unwrap_or(1.0),
        ),
        other => Err(Error::Input(format!(
            "builtin {other:?} does not define a variational problem"
        ))),
    }
}

fn load_candidate_files(config: &RunConfig) -> Result<Option<(Trajectory, RelaxedControl)>> {
    match (&config.files.trajectory_csv, &config.files.relaxed_csv) {
        (Some(tp), Some(rp)) => {
            let traj = Trajectory::read_csv(BufReader::new(fs::File::open(tp)?))?;
            let rc = RelaxedControl::read_csv(BufReader::new(fs::File::open(rp)?))?;
            if traj.grid() != rc.grid() {
                return Err(Error::GridMismatch(
                    "trajectory and relaxed-control files use different grids".into(),
                ));
            }
            Ok(Some((traj, rc)))
        }
        (None, None) => Ok(None),
        _ => Err(Error::Input(
            "trajectory_csv and relaxed_csv must be supplied together".into(),
        )),
    }
}

fn write_report(
    out_dir: Option<&Path>,
    stem: &str,
    json: &str,
    csv: Option<String>,
) -> Result<()> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.json")), json)?;
        if let Some(csv) = csv {
            fs::write(dir.join(format!("{stem}.csv")), csv)?;
        }
    }
    Ok(())
}

fn cert_tolerances(config: &RunConfig) -> CertTolerances {
    CertTolerances {
        transversality: config.tolerances.tol_cert,
        slackness: config.tolerances.tol_cert,
        max_condition: config.tolerances.tol_max,
        adjoint_factor: 10.0,
    }
}

fn cmd_certify(config: &RunConfig, hash: &str, opts: &CliOptions) -> Result<(u8, String)> {
    if config.problem.builtin != "example1" {
        return Err(Error::Input(
            "certify runs on the example1 builtin (or supplied trajectory files for it)".into(),
        ));
    }
    let ex = build_example1(config)?;
    let (traj, rc) = match load_candidate_files(config)? {
        Some(pair) => pair,
        None => {
            let grid = TimeGrid::new(0.0, 1.0, effective_grid(config, opts))?;
            ex.relaxed_candidate(grid, config.certify.perturb_x1)
        }
    };
    let outcome = certify(
        &ex.problem,
        &traj,
        &rc,
        config.control_grid_points,
        &cert_tolerances(config),
        &SolveOptions::default(),
    )?;
    let pass = !outcome.passing().is_empty();
    let report = CertifyReport {
        command: "certify",
        config_sha256: hash.to_string(),
        grid: traj.grid().steps(),
        tolerances: config.tolerances,
        control_grid_points: config.control_grid_points,
        nullspace_dim: outcome.nullspace_dim,
        warnings: outcome.warnings.clone(),
        candidates: outcome
            .results
            .iter()
            .map(|(mt, rep)| CandidateSummary::from_result(mt, rep))
            .collect(),
        normality: outcome.normality,
        pass,
    };
    let json = serde_json::to_string_pretty(&report)?;
    write_report(opts.out_dir.as_deref(), "certify_report", &json, None)?;
    Ok((if pass { 0 } else { 1 }, json))
}

fn bounds_pass(
    report: &ConvergenceReport,
    gap_bound: Option<DecayBound>,
    dev_bound: Option<DecayBound>,
) -> bool {
    report.rows.iter().all(|row| {
        gap_bound.is_none_or(|b| b.allows(row.n, row.gap))
            && dev_bound.is_none_or(|b| b.allows(row.n, row.sup_dev))
    })
}

fn cmd_chatter(config: &RunConfig, hash: &str, opts: &CliOptions) -> Result<(u8, String)> {
    if config.problem.builtin != "example1" {
        return Err(Error::Input(
            "chatter runs on the example1 builtin".into(),
        ));
    }
    let ex = build_example1(config)?;
    let grid = TimeGrid::new(0.0, 1.0, effective_grid(config, opts))?;
    let (x_hat, rc) = ex.relaxed_candidate(grid, 0.0);
    let mode = config
        .chatter
        .mode
        .clone()
        .unwrap_or_else(|| "example1".to_string());
    let chat_opts = ChatterOptions {
        refine_q: config.chatter.refine_q,
        threads: thread_cap(),
    };

    let (gate, normality, overridden) = if opts.override_normality {
        (NormalityGate::Override, None, true)
    } else {
        let outcome = certify(
            &ex.problem,
            &x_hat,
            &rc,
            config.control_grid_points,
            &cert_tolerances(config),
            &SolveOptions::default(),
        )?;
        (
            NormalityGate::Checked(outcome.normality),
            Some(outcome.normality),
            false,
        )
    };
    if let (Some(n), false) = (normality, overridden) {
        if n != NormalityOutcome::Normal {
            // the approximating-sequence hypothesis failed: report and exit 1
            let report = ChatterReport {
                command: "chatter",
                config_sha256: hash.to_string(),
                grid: grid.steps(),
                mode,
                refine_q: config.chatter.refine_q,
                j_star: ex.g_value(1.0),
                normality,
                normality_overridden: false,
                rows: Vec::new(),
                gap_bound: config.chatter.gap_bound,
                dev_bound: config.chatter.dev_bound,
                gaps_monotone: false,
                final_gap: f64::NAN,
                pass: false,
            };
            let json = serde_json::to_string_pretty(&report)?;
            write_report(opts.out_dir.as_deref(), "chatter_report", &json, None)?;
            return Ok((1, json));
        }
    }

    let conv = match mode.as_str() {
        "example1" => example1_convergence_report(&ex, &x_hat, &config.ns, &chat_opts, gate)?,
        "generic" => {
            let j_star = config.chatter.j_star.unwrap_or_else(|| ex.g_value(1.0));
            convergence_report(&ex.problem, &x_hat, &rc, &config.ns, j_star, &chat_opts, gate)?
        }
        other => {
            return Err(Error::Input(format!(
                "unknown chatter mode {other:?} (expected example1 or generic)"
            )))
        }
    };
    // default bounds for the exact construction; generic runs declare theirs
    let gap_bound = config.chatter.gap_bound.or(if mode == "example1" {
        Some(DecayBound {
            coeff: 4.0,
            power: 2.0,
        })
    } else {
        None
    });
    let dev_bound = config.chatter.dev_bound.or(if mode == "example1" {
        Some(DecayBound {
            coeff: 2.0,
            power: 1.0,
        })
    } else {
        None
    });
    let pass = bounds_pass(&conv, gap_bound, dev_bound);
    let mut csv = Vec::new();
    conv.write_csv(&mut csv)?;
    let report = ChatterReport {
        command: "chatter",
        config_sha256: hash.to_string(),
        grid: grid.steps(),
        mode,
        refine_q: config.chatter.refine_q,
        j_star: conv.j_star,
        normality,
        normality_overridden: overridden,
        gaps_monotone: conv.gaps_monotone_nonincreasing(),
        final_gap: conv.final_gap(),
        rows: conv.rows,
        gap_bound,
        dev_bound,
        pass,
    };
    let json = serde_json::to_string_pretty(&report)?;
    write_report(
        opts.out_dir.as_deref(),
        "chatter_report",
        &json,
        Some(String::from_utf8(csv).expect("csv is utf-8")),
    )?;
    Ok((if pass { 0 } else { 1 }, json))
}

fn cmd_calcvar(config: &RunConfig, hash: &str, opts: &CliOptions) -> Result<(u8, String)> {
    let lp = build_lagrangian(config)?;
    let traj = match &config.files.trajectory_csv {
        Some(path) => {
            let t = Trajectory::read_csv(BufReader::new(fs::File::open(path)?))?;
            if t.dim() != lp.n {
                return Err(Error::Input(format!(
                    "trajectory dimension {} does not match the problem ({})",
                    t.dim(),
                    lp.n
                )));
            }
            t
        }
        None => {
            let grid = TimeGrid::new(lp.t0, lp.t1, effective_grid(config, opts))?;
            let (x0, x1) = (lp.x0.clone(), lp.x1.clone());
            Trajectory::from_fn(grid, move |t| {
                let theta = (t - grid.t0()) / (grid.t1() - grid.t0());
                &x0 * (1.0 - theta) + &x1 * theta
            })
        }
    };
    let grid = *traj.grid();
    let rc = match &config.calcvar.vertices {
        Some(vertices) => {
            let verts: Vec<DVector<f64>> = vertices
                .iter()
                .map(|v| DVector::from_row_slice(v))
                .collect();
            if verts.iter().any(|v| v.len() != lp.n) {
                return Err(Error::Input(
                    "vertex controls must match the problem dimension".into(),
                ));
            }
            let signals = constant_vertex_signals(&grid, &verts);
            match decompose_along_trajectory_lagrangian(
                &lp,
                &traj,
                &signals,
                config.calcvar.usl_tol,
            )? {
                DecomposeOutcome::Feasible(rc) => rc,
                DecomposeOutcome::Infeasible(fails) => {
                    return Err(Error::Input(format!(
                        "the velocity/Lagrangian pair admits no decomposition over the given \
                         vertices at {} node(s); first failure at node {} (t = {})",
                        fails.len(),
                        fails[0].node,
                        fails[0].t
                    )));
                }
            }
        }
        None => RelaxedControl::new(
            grid,
            vec![node_velocities(&traj)],
            vec![vec![1.0; grid.num_nodes()]],
        )?,
    };

    let tol = config.tolerances.tol_cv;
    let euler = calcvar::generalized_euler_residual(&lp, &traj, &rc, config.calcvar.usl_tol)?;
    let weier = calcvar::weierstrass_scan(&lp, &traj, &rc, &config.calcvar.u_grid)?;
    let leg = calcvar::legendre_check(&lp, &traj, &rc)?;

    let falsifier = match config.calcvar.run_falsifier {
        Some(false) => FalsifierSummary {
            status: "skipped",
            max_residual: None,
            witness: None,
            skipped_reason: Some("disabled by config".into()),
        },
        force => match calcvar::linearity_falsifier(&lp, &config.calcvar.falsifier_grid, tol) {
            Ok(FalsifierOutcome::Pass { max_residual }) => FalsifierSummary {
                status: "pass",
                max_residual: Some(max_residual),
                witness: None,
                skipped_reason: None,
            },
            Ok(FalsifierOutcome::Violation { u1, u2, residual }) => FalsifierSummary {
                status: "violation",
                max_residual: Some(residual),
                witness: Some(FalsifierWitness { u1, u2, residual }),
                skipped_reason: None,
            },
            Err(e) if force == Some(true) => return Err(e),
            Err(e) => FalsifierSummary {
                status: "skipped",
                max_residual: None,
                witness: None,
                skipped_reason: Some(e.to_string()),
            },
        },
    };

    let euler_pass = euler.sup <= tol;
    let weier_pass = weier.pass(tol);
    let leg_pass = leg.pass(tol);
    let falsifier_ok = falsifier.status != "violation";
    let pass = euler_pass && weier_pass && leg_pass && falsifier_ok;
    let report = CalcvarReport {
        command: "calcvar",
        config_sha256: hash.to_string(),
        grid: grid.steps(),
        tolerances: config.tolerances,
        k: rc.k(),
        euler: EulerSummary {
            sup_residual: euler.sup,
            pass: euler_pass,
        },
        weierstrass: WeierstrassSummary {
            min_excess: weier.min_excess,
            witness: WitnessPoint {
                node: weier.witness.0,
                t: grid.node(weier.witness.0),
                vertex: weier.witness.1,
                u: weier.witness.2.iter().copied().collect(),
            },
            u_bound: [weier.u_bound.0, weier.u_bound.1],
            pass: weier_pass,
        },
        legendre: LegendreSummary {
            min_eigenvalue: leg.min_eigenvalue,
            witness_node: leg.witness.0,
            witness_vertex: leg.witness.1,
            symmetry_warning: leg.symmetry_warning,
            pass: leg_pass,
        },
        falsifier,
        pass,
    };
    let json = serde_json::to_string_pretty(&report)?;
    write_report(opts.out_dir.as_deref(), "calcvar_report", &json, None)?;
    Ok((if pass { 0 } else { 1 }, json))
}

fn cmd_gradcheck(config: &RunConfig, hash: &str, opts: &CliOptions) -> Result<(u8, String)> {
    let seed = opts.seed_override.unwrap_or(config.seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let samples = 100;
    let (h, tol) = (1e-6, 1e-5);
    let report = match config.problem.builtin.as_str() {
        "example1" => {
            let ex = build_example1(config)?;
            let points: Vec<GradCheckSample> = (0..samples)
                .map(|_| GradCheckSample {
                    t: rng.gen_range(0.0..1.0),
                    x: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
                    u: DVector::from_fn(1, |_, _| rng.gen_range(-3.0..3.0)),
                    z1: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
                    z2: DVector::from_fn(2, |_, _| rng.gen_range(-2.0..2.0)),
                })
                .collect();
            check_gradients(&ex.problem, &points, h, tol)?
        }
        "example2" | "quadratic_cv" => {
            let lp = build_lagrangian(config)?;
            let points: Vec<(f64, DVector<f64>, DVector<f64>)> = (0..samples)
                .map(|_| {
                    (
                        rng.gen_range(0.0..1.0),
                        DVector::from_fn(lp.n, |_, _| rng.gen_range(-2.0..2.0)),
                        DVector::from_fn(lp.n, |_, _| rng.gen_range(-2.0..2.0)),
                    )
                })
                .collect();
            calcvar::check_lagrangian_gradients(&lp, &points, h, tol)?
        }
        other => return Err(Error::Input(format!("unknown builtin {other:?}"))),
    };
    let out = GradcheckReport {
        command: "gradcheck",
        config_sha256: hash.to_string(),
        seed,
        samples,
        h,
        tol,
        entries: report.entries,
        pass: report.pass,
    };
    let json = serde_json::to_string_pretty(&out)?;
    write_report(opts.out_dir.as_deref(), "gradcheck_report", &json, None)?;
    Ok((if report.pass { 0 } else { 1 }, json))
}
