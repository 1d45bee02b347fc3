//! Known-plant synthesis: the M-form LP and the sign-enumerated LP.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::sign_vectors;
use crate::lp::{Cmp, LinExpr, LpModel, VarId};
use crate::program::{run_program, CertVars, Objective, ProgramSpec, StabilityMode, SynthesisOutcome};
use crate::quantizer::QuantizerSpec;
use crate::sysmodel::{LinearSystem, StabCertificate};

pub const DEFAULT_ETA: f64 = 1e-6;

/// Guard on `n + m` for every sign-enumerated program.
pub const MAX_SIGN_ENUMERATION: usize = 20;

#[derive(Debug, Clone)]
pub struct NominalProblem {
    pub sys: LinearSystem,
    pub spec: QuantizerSpec,
    pub mode: StabilityMode,
    pub eta: f64,
    pub objective: Objective,
}

impl NominalProblem {
    pub fn new(sys: LinearSystem, spec: QuantizerSpec, mode: StabilityMode) -> Self {
        Self {
            sys,
            spec,
            mode,
            eta: DEFAULT_ETA,
            objective: Objective::Feasibility,
        }
    }

    pub fn with_objective(mut self, objective: Objective) -> Self {
        self.objective = objective;
        self
    }

    pub fn with_eta(mut self, eta: f64) -> Self {
        self.eta = eta;
        self
    }

    fn program(&self) -> Result<ProgramSpec> {
        if self.spec.channels() != self.sys.m() {
            return Err(Error::dim(format!(
                "quantizer has {} channels, plant has {} inputs",
                self.spec.channels(),
                self.sys.m()
            )));
        }
        Ok(ProgramSpec {
            n: self.sys.n(),
            m: self.sys.m(),
            mode: self.mode,
            objective: self.objective,
            eta: self.eta,
        })
    }
}

/// Entry `(i, j)` of `A·Y + B·diag(β)·S` as an expression in `(v, S)`.
pub(crate) fn vertex_entry(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    vars: &CertVars,
    beta: &[f64],
    i: usize,
    j: usize,
) -> LinExpr {
    let mut e = vars.v[j].clone() * a[(i, j)];
    for (k, bk) in beta.iter().enumerate() {
        e.add_scaled(&vars.s[k][j], b[(i, k)] * bk);
    }
    e
}

/// M-form program: `Σ_j M_ij ≤ v_i − η` and `−M ≤ A·Y + B·diag(β)·S ≤ M` at
/// every sector vertex.
pub fn synthesize_nominal_mform(problem: &NominalProblem) -> Result<SynthesisOutcome> {
    let prog = problem.program()?;
    let (a, b) = (problem.sys.a(), problem.sys.b());
    let n = prog.n;
    let vertices = problem.spec.vertices();
    let out = run_program(&prog, |model: &mut LpModel, vars: &CertVars| {
        let mvars: Vec<Vec<VarId>> = (0..n)
            .map(|_| model.add_vars(n, 0.0, f64::INFINITY))
            .collect();
        for (i, row) in mvars.iter().enumerate() {
            model.add_constraint(LinExpr::sum(row.iter().copied()), Cmp::Le, vars.row_bound(i));
        }
        for beta in &vertices {
            for i in 0..n {
                for j in 0..n {
                    let x = vertex_entry(a, b, vars, beta, i, j);
                    let mij = LinExpr::var(mvars[i][j]);
                    model.add_constraint(x.clone(), Cmp::Le, mij.clone());
                    model.add_constraint(-x, Cmp::Le, mij);
                }
            }
        }
        Ok(mvars)
    })?;
    Ok(out.map(|solved| {
        let m = DMatrix::from_fn(n, n, |i, j| solved.solution.value(solved.handles[i][j]));
        StabCertificate {
            m: Some(m),
            ..solved.cert
        }
    }))
}

/// Sign form: `Σ_j α_j (A_ij v_j + Σ_k β_k B_ik S_kj) ≤ v_i − η` for every
/// row `i`, sign vector `α` and sector vertex `β`.
pub fn synthesize_nominal_sign(problem: &NominalProblem) -> Result<SynthesisOutcome> {
    let prog = problem.program()?;
    check_sign_guard(prog.n, prog.m)?;
    let (a, b) = (problem.sys.a(), problem.sys.b());
    let n = prog.n;
    let vertices = problem.spec.vertices();
    let out = run_program(&prog, |model: &mut LpModel, vars: &CertVars| {
        for alpha in sign_vectors(n) {
            for beta in &vertices {
                for i in 0..n {
                    let mut lhs = LinExpr::zero();
                    for (j, aj) in alpha.iter().enumerate() {
                        lhs.add_scaled(&vertex_entry(a, b, vars, beta, i, j), *aj);
                    }
                    model.add_constraint(lhs, Cmp::Le, vars.row_bound(i));
                }
            }
        }
        Ok(())
    })?;
    Ok(out.map(|solved| solved.cert))
}

pub(crate) fn check_sign_guard(n: usize, m: usize) -> Result<()> {
    if n + m > MAX_SIGN_ENUMERATION {
        return Err(Error::EnumerationGuard {
            what: "n + m",
            value: n + m,
            limit: MAX_SIGN_ENUMERATION,
        });
    }
    Ok(())
}
