//! Named built-in function specs selectable from JSON configs.

use nalgebra::{DMatrix, DVector, RowDVector};

use crate::calcvar::{LagrangianBundle, LagrangianProblem};
use crate::error::{Error, Result};
use crate::problem::{ScalarFn, ScalarPath};

/// Tracked paths `f(t)` with `f(0) = 0` and `|ḟ| < 1`.
pub fn scalar_path(name: &str) -> Result<ScalarPath> {
    match name {
        "linear_half" => Ok(ScalarPath::new(|t| 0.5 * t, |_| 0.5)),
        "zero" => Ok(ScalarPath::new(|_| 0.0, |_| 0.0)),
        "quarter_sine" => Ok(ScalarPath::new(
            |t| 0.25 * (std::f64::consts::PI * t).sin(),
            |t| 0.25 * std::f64::consts::PI * (std::f64::consts::PI * t).cos(),
        )),
        other => Err(Error::Input(format!("unknown path spec {other:?}"))),
    }
}

/// Control-cost terms `g(u)` with `g(-1) = g(1)` and `g(u) > g(1)` for `|u| > 1`.
pub fn control_cost(name: &str) -> Result<ScalarFn> {
    match name {
        "square" => Ok(ScalarFn::new(|u| u * u)),
        "quartic" => Ok(ScalarFn::new(|u| u.powi(4))),
        "abs" => Ok(ScalarFn::new(f64::abs)),
        other => Err(Error::Input(format!("unknown control cost {other:?}"))),
    }
}

fn scalar_bundle(
    l: impl Fn(f64, f64) -> f64 + Copy + Send + Sync + 'static,
    lx: impl Fn(f64, f64) -> f64 + Copy + Send + Sync + 'static,
    lv: impl Fn(f64, f64) -> f64 + Copy + Send + Sync + 'static,
    lvv: impl Fn(f64, f64) -> f64 + Copy + Send + Sync + 'static,
) -> LagrangianBundle {
    LagrangianBundle {
        l: Box::new(move |_t, x: &DVector<f64>, v: &DVector<f64>| l(x[0], v[0])),
        l_x: Some(Box::new(move |_t, x: &DVector<f64>, v: &DVector<f64>| {
            RowDVector::from_row_slice(&[lx(x[0], v[0])])
        })),
        l_v: Some(Box::new(move |_t, x: &DVector<f64>, v: &DVector<f64>| {
            RowDVector::from_row_slice(&[lv(x[0], v[0])])
        })),
        l_vv: Some(Box::new(move |_t, x: &DVector<f64>, v: &DVector<f64>| {
            DMatrix::from_element(1, 1, lvv(x[0], v[0]))
        })),
    }
}

/// Scalar autonomous Lagrangians with analytic first and second derivatives.
pub fn lagrangian_bundle(name: &str) -> Result<LagrangianBundle> {
    match name {
        // L = x ẋ²
        "x_udot_sq" => Ok(scalar_bundle(
            |x, v| x * v * v,
            |_x, v| v * v,
            |x, v| 2.0 * x * v,
            |x, _v| 2.0 * x,
        )),
        // L = x ẋ
        "x_udot" => Ok(scalar_bundle(
            |x, v| x * v,
            |_x, v| v,
            |x, _v| x,
            |_x, _v| 0.0,
        )),
        // L = x sin(ẋ)
        "x_sin_udot" => Ok(scalar_bundle(
            |x, v| x * v.sin(),
            |_x, v| v.sin(),
            |x, v| x * v.cos(),
            |x, v| -x * v.sin(),
        )),
        // L = ẋ²
        "udot_sq" => Ok(scalar_bundle(
            |_x, v| v * v,
            |_x, _v| 0.0,
            |_x, v| 2.0 * v,
            |_x, _v| 2.0,
        )),
        // L = -ẋ²
        "neg_udot_sq" => Ok(scalar_bundle(
            |_x, v| -v * v,
            |_x, _v| 0.0,
            |_x, v| -2.0 * v,
            |_x, _v| -2.0,
        )),
        // L = ẋ² - ẋ⁴
        "sq_minus_quartic" => Ok(scalar_bundle(
            |_x, v| v * v - v.powi(4),
            |_x, _v| 0.0,
            |_x, v| 2.0 * v - 4.0 * v.powi(3),
            |_x, v| 2.0 - 12.0 * v * v,
        )),
        // L = ẋ²/2 + x (extremals ẍ = 1)
        "half_udot_sq_plus_x" => Ok(scalar_bundle(
            |x, v| 0.5 * v * v + x,
            |_x, _v| 1.0,
            |_x, v| v,
            |_x, _v| 1.0,
        )),
        other => Err(Error::Input(format!("unknown lagrangian {other:?}"))),
    }
}

/// Scalar fixed-endpoint problem on `[0, 1]` from a named Lagrangian.
pub fn lagrangian_problem(name: &str, x0: f64, x1: f64) -> Result<LagrangianProblem> {
    Ok(LagrangianProblem::from_bundle(
        0.0,
        1.0,
        1,
        lagrangian_bundle(name)?,
        DVector::from_row_slice(&[x0]),
        DVector::from_row_slice(&[x1]),
    ))
}
