//! Pieces shared by every certificate LP: the `(v, S, λ)` decision
//! variables, the per-row right-hand side, and the λ objective driver.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::{solve, LinExpr, LpModel, LpSolution, LpStatus, VarId};
use crate::sysmodel::StabCertificate;

/// Bisection tolerance on λ for extended superstability.
pub(crate) const LAMBDA_TOL: f64 = 1e-4;

/// Weights are normalized to `1 ≤ v_i ≤ WEIGHT_CAP`. The lower bound loses
/// nothing: scaling a certificate up by `c ≥ 1` keeps it valid for the same
/// `η`.
pub(crate) const WEIGHT_CAP: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityMode {
    /// Superstability: `v = 1`.
    Ss,
    /// Extended superstability: free weights `v > 0`.
    Ess,
}

impl fmt::Display for StabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StabilityMode::Ss => "ss",
            StabilityMode::Ess => "ess",
        })
    }
}

impl FromStr for StabilityMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ss" => Ok(StabilityMode::Ss),
            "ess" => Ok(StabilityMode::Ess),
            other => Err(Error::domain(format!("unknown stability mode '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    /// Any certificate with row sums at most `v_i − η`.
    Feasibility,
    /// Smallest achievable gain λ.
    MinimizeLambda,
}

/// Result of a synthesis call. `Infeasible` is an ordinary answer, not an
/// error.
#[derive(Debug, Clone)]
pub enum SynthesisOutcome<T = StabCertificate> {
    Certified(T),
    Infeasible,
}

impl<T> SynthesisOutcome<T> {
    pub fn is_certified(&self) -> bool {
        matches!(self, SynthesisOutcome::Certified(_))
    }

    pub fn certified(self) -> Option<T> {
        match self {
            SynthesisOutcome::Certified(t) => Some(t),
            SynthesisOutcome::Infeasible => None,
        }
    }

    pub fn as_ref(&self) -> SynthesisOutcome<&T> {
        match self {
            SynthesisOutcome::Certified(t) => SynthesisOutcome::Certified(t),
            SynthesisOutcome::Infeasible => SynthesisOutcome::Infeasible,
        }
    }

    pub fn map<U>(self, f: impl FnOnce(T) -> U) -> SynthesisOutcome<U> {
        match self {
            SynthesisOutcome::Certified(t) => SynthesisOutcome::Certified(f(t)),
            SynthesisOutcome::Infeasible => SynthesisOutcome::Infeasible,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum RowBound {
    /// `v_i − η`
    Margin,
    /// `λ` as a decision variable (superstability only).
    Lambda(VarId),
    /// `λ̄·v_i − η` for a fixed `λ̄`.
    Scaled(f64),
}

/// Certificate variables inside one LP.
#[derive(Debug, Clone)]
pub(crate) struct CertVars {
    /// `v_i`, constant 1 for superstability.
    pub v: Vec<LinExpr>,
    /// `S_kj`, indexed `[k][j]`.
    pub s: Vec<Vec<LinExpr>>,
    eta: f64,
    bound: RowBound,
}

impl CertVars {
    pub fn declare(model: &mut LpModel, n: usize, m: usize, mode: StabilityMode, eta: f64) -> Self {
        let v = match mode {
            StabilityMode::Ss => vec![LinExpr::constant(1.0); n],
            StabilityMode::Ess => (0..n)
                .map(|_| LinExpr::var(model.add_var(1.0, WEIGHT_CAP)))
                .collect(),
        };
        let s = (0..m)
            .map(|_| (0..n).map(|_| LinExpr::var(model.add_free_var())).collect())
            .collect();
        Self {
            v,
            s,
            eta,
            bound: RowBound::Margin,
        }
    }

    pub fn n(&self) -> usize {
        self.v.len()
    }

    /// Right-hand side of the `i`-th row-sum inequality.
    pub fn row_bound(&self, i: usize) -> LinExpr {
        match self.bound {
            RowBound::Margin => self.v[i].clone() - LinExpr::constant(self.eta),
            RowBound::Lambda(l) => LinExpr::var(l),
            RowBound::Scaled(lam) => self.v[i].clone() * lam - LinExpr::constant(self.eta),
        }
    }

    fn values(&self, sol: &LpSolution) -> (DVector<f64>, DMatrix<f64>) {
        let n = self.n();
        let m = self.s.len();
        let v = DVector::from_iterator(n, self.v.iter().map(|e| sol.eval(e)));
        let s = DMatrix::from_fn(m, n, |k, j| sol.eval(&self.s[k][j]));
        (v, s)
    }
}

pub(crate) struct ProgramSpec {
    pub n: usize,
    pub m: usize,
    pub mode: StabilityMode,
    pub objective: Objective,
    pub eta: f64,
}

impl ProgramSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 1.0) {
            return Err(Error::domain(format!("eta must lie in (0, 1), got {}", self.eta)));
        }
        Ok(())
    }
}

/// A solved program: the certificate plus whatever handles the builder
/// returned, with the solution that realizes them.
pub(crate) struct Solved<H> {
    pub cert: StabCertificate,
    pub handles: H,
    pub solution: LpSolution,
}

/// Builds and solves one certificate LP, running λ bisection when asked for
/// extended superstability.
///
/// `build` adds all problem-specific constraints, reading the row bound from
/// [`CertVars::row_bound`].
pub(crate) fn run_program<H>(
    spec: &ProgramSpec,
    build: impl Fn(&mut LpModel, &CertVars) -> Result<H>,
) -> Result<SynthesisOutcome<Solved<H>>> {
    spec.validate()?;
    match (spec.objective, spec.mode) {
        (Objective::Feasibility, _) => probe(spec, RowBoundKind::Margin, &build),
        (Objective::MinimizeLambda, StabilityMode::Ss) => probe(spec, RowBoundKind::Lambda, &build),
        (Objective::MinimizeLambda, StabilityMode::Ess) => {
            let SynthesisOutcome::Certified(mut best) =
                probe(spec, RowBoundKind::Scaled(1.0), &build)?
            else {
                return Ok(SynthesisOutcome::Infeasible);
            };
            let (mut lo, mut hi) = (0.0, 1.0);
            while hi - lo > LAMBDA_TOL {
                let mid = 0.5 * (lo + hi);
                match probe(spec, RowBoundKind::Scaled(mid), &build)? {
                    SynthesisOutcome::Certified(s) => {
                        hi = mid;
                        best = s;
                    }
                    SynthesisOutcome::Infeasible => lo = mid,
                }
            }
            Ok(SynthesisOutcome::Certified(best))
        }
    }
}

#[derive(Clone, Copy)]
enum RowBoundKind {
    Margin,
    Lambda,
    Scaled(f64),
}

fn probe<H>(
    spec: &ProgramSpec,
    kind: RowBoundKind,
    build: &impl Fn(&mut LpModel, &CertVars) -> Result<H>,
) -> Result<SynthesisOutcome<Solved<H>>> {
    let mut model = LpModel::new();
    let mut vars = CertVars::declare(&mut model, spec.n, spec.m, spec.mode, spec.eta);
    vars.bound = match kind {
        RowBoundKind::Margin => RowBound::Margin,
        RowBoundKind::Scaled(l) => RowBound::Scaled(l),
        RowBoundKind::Lambda => {
            let l = model.add_var(0.0, 1.0 - spec.eta);
            model.minimize(LinExpr::var(l));
            RowBound::Lambda(l)
        }
    };
    let handles = build(&mut model, &vars)?;
    let solution = solve(&model);
    match solution.status {
        LpStatus::Optimal => {}
        LpStatus::Infeasible => return Ok(SynthesisOutcome::Infeasible),
        LpStatus::Unbounded => {
            return Err(Error::Solver("certificate LP reported unbounded".into()))
        }
        LpStatus::NumericalFailure => {
            return Err(Error::Solver(
                solution
                    .message
                    .clone()
                    .unwrap_or_else(|| "numerical failure".into()),
            ))
        }
    }
    let (v, s) = vars.values(&solution);
    let lambda = match vars.bound {
        RowBound::Margin => v
            .iter()
            .map(|vi| (vi - spec.eta) / vi)
            .fold(0.0, f64::max),
        RowBound::Lambda(l) => solution.value(l),
        RowBound::Scaled(l) => l,
    };
    let cert = StabCertificate::new(v, s, None, lambda, spec.eta, spec.mode)?;
    Ok(SynthesisOutcome::Certified(Solved {
        cert,
        handles,
        solution,
    }))
}
