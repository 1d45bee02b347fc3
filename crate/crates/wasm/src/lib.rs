//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export has a plain-Rust twin (`*_impl`) so the logic can be tested
//! natively; the exported wrappers only convert errors to `JsError`.

use nalgebra::DVector;
use qddc::experiments::{builtin_system, log_grid, sweep, ExperimentConfig, Instance, Method};
use qddc::nominal::{synthesize_nominal_sign, NominalProblem};
use qddc::quantizer::{delta_from_rho, log_quantize};
use qddc::sysmodel::simulate_quantized;
use qddc::{Objective, QuantizerSpec, StabilityMode};
use wasm_bindgen::prelude::*;

fn parse_mode(mode: &str) -> qddc::Result<StabilityMode> {
    match mode {
        "ss" => Ok(StabilityMode::Ss),
        "ess" => Ok(StabilityMode::Ess),
        other => Err(qddc::Error::Domain(format!("unknown mode '{other}'"))),
    }
}

/// Samples `g_ρ` on `[-z_max, z_max]`. Output is flat, four values per
/// point: `z, g(z), (1−δ)z, (1+δ)z`.
pub fn quantizer_curve_impl(rho: f64, z_max: f64, points: usize) -> qddc::Result<Vec<f64>> {
    let delta = delta_from_rho(rho)?;
    if !(z_max > 0.0 && z_max.is_finite()) || points < 2 {
        return Err(qddc::Error::Domain("need a positive range and at least two points".into()));
    }
    let mut out = Vec::with_capacity(4 * points);
    for k in 0..points {
        let z = -z_max + 2.0 * z_max * k as f64 / (points - 1) as f64;
        out.extend([z, log_quantize(z, rho)?, (1.0 - delta) * z, (1.0 + delta) * z]);
    }
    Ok(out)
}

/// Minimized λ of the known-plant program on a log grid over `[lo, 1]`.
/// Flat pairs `ρ, λ`, with `NaN` where the program is infeasible.
pub fn lambda_sweep_impl(system: &str, mode: &str, lo: f64, points: usize) -> qddc::Result<Vec<f64>> {
    let sys = builtin_system(system)?;
    let config = ExperimentConfig::new(Method::Nominal, parse_mode(mode)?);
    let grid = log_grid(lo, 1.0, points)?;
    let pts = sweep(Instance::Plant(&sys), &config, &grid, false)?;
    Ok(pts.iter().flat_map(|p| [p.rho, p.lambda.unwrap_or(f64::NAN)]).collect())
}

/// A quantized closed-loop run under a synthesized controller.
#[wasm_bindgen]
#[derive(Debug, Clone)]
pub struct Simulation {
    n: usize,
    lambda: f64,
    diverged: bool,
    states: Vec<f64>,
    weighted_norms: Vec<f64>,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(getter)]
    pub fn n(&self) -> usize {
        self.n
    }

    #[wasm_bindgen(getter)]
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    #[wasm_bindgen(getter)]
    pub fn diverged(&self) -> bool {
        self.diverged
    }

    /// Row-major `(steps+1)×n`.
    #[wasm_bindgen(getter)]
    pub fn states(&self) -> Vec<f64> {
        self.states.clone()
    }

    /// `max_i |x_i|/v_i` at every step.
    #[wasm_bindgen(getter, js_name = weightedNorms)]
    pub fn weighted_norms(&self) -> Vec<f64> {
        self.weighted_norms.clone()
    }
}

/// Designs a sign-form controller for `system` at density `rho` and runs it
/// from `x0`.
pub fn simulate_impl(system: &str, mode: &str, rho: f64, x0: &[f64], steps: usize) -> qddc::Result<Simulation> {
    let sys = builtin_system(system)?;
    let spec = QuantizerSpec::uniform(sys.m(), rho)?;
    let problem = NominalProblem::new(sys.clone(), spec.clone(), parse_mode(mode)?)
        .with_objective(Objective::MinimizeLambda);
    let Some(cert) = synthesize_nominal_sign(&problem)?.certified() else {
        return Err(qddc::Error::Domain(format!("no certificate at density {rho}")));
    };
    let x0 = DVector::from_column_slice(x0);
    let traj = simulate_quantized(&sys, &cert.k, &spec, &x0, steps)?;
    let weighted_norms = traj
        .states
        .iter()
        .map(|x| x.iter().zip(cert.v.iter()).fold(0.0f64, |w, (xi, vi)| w.max(xi.abs() / vi)))
        .collect();
    Ok(Simulation {
        n: sys.n(),
        lambda: cert.lambda,
        diverged: traj.diverged,
        states: traj.states.iter().flat_map(|x| x.iter().copied()).collect(),
        weighted_norms,
    })
}

fn js(e: qddc::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = quantizerCurve)]
pub fn quantizer_curve(rho: f64, z_max: f64, points: usize) -> Result<Vec<f64>, JsError> {
    quantizer_curve_impl(rho, z_max, points).map_err(js)
}

#[wasm_bindgen(js_name = lambdaSweep)]
pub fn lambda_sweep(system: &str, mode: &str, lo: f64, points: usize) -> Result<Vec<f64>, JsError> {
    lambda_sweep_impl(system, mode, lo, points).map_err(js)
}

#[wasm_bindgen]
pub fn simulate(system: &str, mode: &str, rho: f64, x0: &[f64], steps: usize) -> Result<Simulation, JsError> {
    simulate_impl(system, mode, rho, x0, steps).map_err(js)
}

/// State dimension of a built-in plant, or 0 for an unknown name.
#[wasm_bindgen(js_name = systemDimension)]
pub fn system_dimension(system: &str) -> usize {
    builtin_system(system).map_or(0, |s| s.n())
}
