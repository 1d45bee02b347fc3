//! Built-in example plants and partitions, minimal-density bisection, λ
//! sweeps and the certificate file format used by the CLI.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};
use crate::lp::Polytope;
use crate::nominal::{synthesize_nominal_mform, NominalProblem};
use crate::program::{Objective, StabilityMode, SynthesisOutcome};
use crate::quantizer::{Partition, QuantizerSpec};
use crate::synth_aarc::{synthesize_aarc, AffineMParam};
use crate::synth_sign::{synthesize_sign, SynthesisOptions};
use crate::sysmodel::{LinearSystem, StabCertificate};

/// Bisection tolerance on ρ.
pub const RHO_TOL: f64 = 1e-4;

/// The 3-state, 2-input example plant.
pub fn sys1() -> LinearSystem {
    LinearSystem::from_rows(
        &[
            vec![-0.1300, -0.3974, 0.2030],
            vec![-0.3974, -0.5000, 0.2990],
            vec![0.2030, 0.2990, -0.5262],
        ],
        &[vec![0.2179, 1.2300], vec![0.3592, 0.0], vec![-1.1553, 0.0]],
    )
    .expect("built-in plant is well formed")
}

/// The 5-state, 3-input example plant `A = L/5 + c·I`, `B = [I₃; 0]`, where
/// `L_ij = min(i/j, j/i)` with 1-based indices.
///
/// The diagonal shift is `c = 0.45`: this is the value whose spectrum matches
/// the reference eigenvalues `1.0633, 0.6507, 0.5502, 0.5046, 0.4812`.
/// [`sys2_half_shift`] gives the `c = 0.5` variant.
pub fn sys2() -> LinearSystem {
    lehmer_plant(0.45)
}

/// [`sys2`] with diagonal shift `1/2`.
pub fn sys2_half_shift() -> LinearSystem {
    lehmer_plant(0.5)
}

fn lehmer_plant(shift: f64) -> LinearSystem {
    let a = DMatrix::from_fn(5, 5, |i, j| {
        let (i, j) = ((i + 1) as f64, (j + 1) as f64);
        (i / j).min(j / i) / 5.0 + if i == j { shift } else { 0.0 }
    });
    let b = DMatrix::from_fn(5, 3, |i, j| if i == j { 1.0 } else { 0.0 });
    LinearSystem::new(a, b).expect("built-in plant is well formed")
}

/// Unit bins between −4 and 4.
pub fn partition_coarse() -> Partition {
    Partition::uniform(-4.0, 4.0, 1.0).expect("valid partition")
}

/// Half-unit bins between −6 and 6.
pub fn partition_fine() -> Partition {
    Partition::uniform(-6.0, 6.0, 0.5).expect("valid partition")
}

pub fn builtin_system(name: &str) -> Result<LinearSystem> {
    match name {
        "sys1" => Ok(sys1()),
        "sys2" => Ok(sys2()),
        "sys2-half" => Ok(sys2_half_shift()),
        other => Err(Error::domain(format!("unknown built-in system '{other}'"))),
    }
}

pub fn builtin_partition(name: &str) -> Result<Partition> {
    match name {
        "coarse" => Ok(partition_coarse()),
        "fine" => Ok(partition_fine()),
        other => Err(Error::domain(format!("unknown built-in partition '{other}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Sign,
    Aarc,
    Nominal,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Sign => "sign",
            Method::Aarc => "aarc",
            Method::Nominal => "nominal",
        })
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sign" => Ok(Method::Sign),
            "aarc" => Ok(Method::Aarc),
            "nominal" => Ok(Method::Nominal),
            other => Err(Error::domain(format!("unknown method '{other}'"))),
        }
    }
}

/// What a synthesis run is given: a known plant, or a consistency polytope
/// with the input count `m`.
#[derive(Debug, Clone, Copy)]
pub enum Instance<'a> {
    Plant(&'a LinearSystem),
    Data { polytope: &'a Polytope, m: usize },
}

impl Instance<'_> {
    fn inputs(&self) -> usize {
        match self {
            Instance::Plant(sys) => sys.m(),
            Instance::Data { m, .. } => *m,
        }
    }
}

/// Everything except the instance and ρ.
#[derive(Debug, Clone, Copy)]
pub struct ExperimentConfig {
    pub method: Method,
    pub mode: StabilityMode,
    pub eta: f64,
    pub objective: Objective,
}

impl ExperimentConfig {
    pub fn new(method: Method, mode: StabilityMode) -> Self {
        Self {
            method,
            mode,
            eta: crate::nominal::DEFAULT_ETA,
            objective: Objective::Feasibility,
        }
    }
}

/// A synthesized certificate together with the affine bound map when AARC
/// produced it.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub cert: StabCertificate,
    pub param: Option<AffineMParam>,
}

/// Runs the configured synthesizer at density `rho` on every channel.
pub fn synthesize(
    instance: Instance<'_>,
    config: &ExperimentConfig,
    rho: f64,
) -> Result<SynthesisOutcome<RunResult>> {
    let spec = QuantizerSpec::uniform(instance.inputs(), rho)?;
    let options = SynthesisOptions::new(spec.clone(), config.mode)
        .with_eta(config.eta)
        .with_objective(config.objective);
    match (config.method, instance) {
        (Method::Nominal, Instance::Plant(sys)) => {
            let problem = NominalProblem::new(sys.clone(), spec, config.mode)
                .with_eta(config.eta)
                .with_objective(config.objective);
            Ok(synthesize_nominal_mform(&problem)?.map(|cert| RunResult { cert, param: None }))
        }
        (Method::Nominal, Instance::Data { .. }) => Err(Error::domain(
            "the nominal method needs a plant, not a data polytope",
        )),
        (_, Instance::Plant(_)) => Err(Error::domain(
            "data-driven methods need a data polytope",
        )),
        (Method::Sign, Instance::Data { polytope, .. }) => {
            Ok(synthesize_sign(polytope, &options)?.map(|c| RunResult {
                cert: c.cert,
                param: None,
            }))
        }
        (Method::Aarc, Instance::Data { polytope, .. }) => {
            Ok(synthesize_aarc(polytope, &options)?.map(|c| RunResult {
                cert: c.cert,
                param: Some(c.param),
            }))
        }
    }
}

fn feasible_at(instance: Instance<'_>, config: &ExperimentConfig, rho: f64) -> Result<bool> {
    let config = ExperimentConfig {
        objective: Objective::Feasibility,
        ..*config
    };
    Ok(synthesize(instance, &config, rho)?.is_certified())
}

/// Smallest feasible density, by bisection on `(0, 1]` to within `tol`.
///
/// Returns the feasible end of the final bracket, or `None` when even `ρ = 1`
/// is infeasible. Inside the bisection a probe that the solver cannot
/// resolve counts as not certified, so the returned density always carries a
/// certificate that was actually found.
pub fn min_rho(instance: Instance<'_>, config: &ExperimentConfig, tol: f64) -> Result<Option<f64>> {
    if !(tol > 0.0) {
        return Err(Error::domain("bisection tolerance must be positive"));
    }
    if !feasible_at(instance, config, 1.0)? {
        return Ok(None);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        match feasible_at(instance, config, mid) {
            Ok(true) => hi = mid,
            Ok(false) | Err(Error::Solver(_)) => lo = mid,
            Err(e) => return Err(e),
        }
    }
    Ok(Some(hi))
}

/// `count` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi <= 1.0) || count == 0 {
        return Err(Error::domain("grid must satisfy 0 < lo <= hi <= 1 with at least one point"));
    }
    if count == 1 {
        return Ok(vec![hi]);
    }
    let (a, b) = (lo.ln(), hi.ln());
    Ok((0..count)
        .map(|k| {
            if k + 1 == count {
                hi
            } else {
                (a + (b - a) * k as f64 / (count - 1) as f64).exp()
            }
        })
        .collect())
}

/// Default sweep grid: 25 log-spaced densities in `[0.05, 1]`.
pub fn default_grid() -> Vec<f64> {
    log_grid(0.05, 1.0, 25).expect("static grid is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum PointStatus {
    Feasible,
    Infeasible,
    /// The LP solvers failed at this density.
    Unresolved,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub rho: f64,
    /// Minimized λ, present only when feasible.
    pub lambda: Option<f64>,
    pub status: PointStatus,
}

/// Minimized λ at every grid density.
pub fn sweep(
    instance: Instance<'_>,
    config: &ExperimentConfig,
    grid: &[f64],
    parallel: bool,
) -> Result<Vec<SweepPoint>> {
    let config = ExperimentConfig {
        objective: Objective::MinimizeLambda,
        ..*config
    };
    let point = |&rho: &f64| -> Result<SweepPoint> {
        let (lambda, status) = match synthesize(instance, &config, rho) {
            Ok(out) => match out.certified() {
                Some(r) => (Some(r.cert.lambda), PointStatus::Feasible),
                None => (None, PointStatus::Infeasible),
            },
            Err(Error::Solver(_)) => (None, PointStatus::Unresolved),
            Err(e) => return Err(e),
        };
        Ok(SweepPoint { rho, lambda, status })
    };
    #[cfg(feature = "parallel")]
    if parallel {
        use rayon::prelude::*;
        return grid.par_iter().map(point).collect();
    }
    let _ = parallel;
    grid.iter().map(point).collect()
}

/// CSV with header `rho,lambda,status`.
pub fn sweep_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("rho,lambda,status\n");
    for p in points {
        let lambda = p.lambda.map(|l| l.to_string()).unwrap_or_default();
        let status = match p.status {
            PointStatus::Feasible => "feasible",
            PointStatus::Infeasible => "infeasible",
            PointStatus::Unresolved => "unresolved",
        };
        out.push_str(&format!("{},{lambda},{status}\n", p.rho));
    }
    out
}

/// On-disk certificate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateFile {
    pub status: String,
    pub method: Method,
    pub mode: StabilityMode,
    pub rho: f64,
    pub lambda: f64,
    pub eta: f64,
    pub v: Vec<f64>,
    #[serde(rename = "S")]
    pub s: Vec<Vec<f64>>,
    #[serde(rename = "K")]
    pub k: Vec<Vec<f64>>,
    #[serde(rename = "M", default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ma: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mb: Option<Vec<Vec<f64>>>,
}

impl CertificateFile {
    pub fn new(result: &RunResult, method: Method, rho: f64, status: &str) -> Self {
        let c = &result.cert;
        let p = result.param.as_ref();
        Self {
            status: status.to_string(),
            method,
            mode: c.mode,
            rho,
            lambda: c.lambda,
            eta: c.eta,
            v: c.v.iter().copied().collect(),
            s: matrix_to_rows(&c.s),
            k: matrix_to_rows(&c.k),
            m: c.m.as_ref().map(matrix_to_rows),
            m0: p.map(|p| p.m0.iter().copied().collect()),
            ma: p.map(|p| matrix_to_rows(&p.ma)),
            mb: p.map(|p| matrix_to_rows(&p.mb)),
        }
    }

    /// Rebuilds the certificate; `K` is recomputed from `(S, v)` and must
    /// agree with the stored one.
    pub fn to_certificate(&self) -> Result<StabCertificate> {
        let n = self.v.len();
        let v = DVector::from_vec(self.v.clone());
        let s = matrix_from_rows(&self.s, n)?;
        let m = self.m.as_ref().map(|m| matrix_from_rows(m, n)).transpose()?;
        let cert = StabCertificate::new(v, s, m, self.lambda, self.eta, self.mode)?;
        let k = matrix_from_rows(&self.k, n)?;
        if k.shape() != cert.k.shape() || (&k - &cert.k).abs().max() > 1e-9 * (1.0 + k.abs().max()) {
            return Err(Error::domain("stored K does not match S·diag(1./v)"));
        }
        Ok(cert)
    }

    pub fn spec(&self) -> Result<QuantizerSpec> {
        QuantizerSpec::uniform(self.s.len(), self.rho)
    }
}
