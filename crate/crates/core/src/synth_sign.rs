//! Exact data-driven synthesis: one Farkas containment block per sign vector
//! `α` and sector vertex `β`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::sign_vectors;
use crate::lp::{max_linear_over_polytope, FarkasBlock, FarkasSource, LinExpr, LpModel, Polytope};
use crate::nominal::{check_sign_guard, DEFAULT_ETA};
use crate::program::{run_program, CertVars, Objective, ProgramSpec, StabilityMode, SynthesisOutcome};
use crate::quantizer::QuantizerSpec;
use crate::sysmodel::StabCertificate;

/// Settings shared by the data-driven synthesizers.
#[derive(Debug, Clone)]
pub struct SynthesisOptions {
    pub spec: QuantizerSpec,
    pub mode: StabilityMode,
    pub eta: f64,
    pub objective: Objective,
    /// Keep the Farkas multipliers in the result.
    pub keep_multipliers: bool,
}

impl SynthesisOptions {
    pub fn new(spec: QuantizerSpec, mode: StabilityMode) -> Self {
        Self {
            spec,
            mode,
            eta: DEFAULT_ETA,
            objective: Objective::Feasibility,
            keep_multipliers: false,
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

    pub(crate) fn program(&self, polytope: &Polytope) -> Result<ProgramSpec> {
        let m = self.spec.channels();
        let n = state_dim(polytope.dim(), m)?;
        Ok(ProgramSpec {
            n,
            m,
            mode: self.mode,
            objective: self.objective,
            eta: self.eta,
        })
    }
}

/// Solves `n² + n·m = d` for `n`.
pub(crate) fn state_dim(d: usize, m: usize) -> Result<usize> {
    let n = (((m * m + 4 * d) as f64).sqrt() - m as f64) / 2.0;
    let n = n.round() as usize;
    if n == 0 || n * (n + m) != d {
        return Err(Error::dim(format!(
            "polytope dimension {d} is not n(n + {m}) for any n ≥ 1"
        )));
    }
    Ok(n)
}

/// Multipliers of one `(α, β)` block.
#[derive(Debug, Clone, Serialize)]
pub struct MultiplierBlock {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// `n × L`
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SignCertificate {
    pub cert: StabCertificate,
    /// Filled when [`SynthesisOptions::keep_multipliers`] is set; order is `α`
    /// outer, `β` inner.
    pub blocks: Vec<MultiplierBlock>,
}

/// Model sizes, either predicted by formula or read off an assembled model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ConstraintCounts {
    /// Robust inequalities, one Farkas right-hand-side row each.
    pub robust_inequalities: usize,
    /// Nonnegative multiplier variables.
    pub farkas_variables: usize,
    /// Equality rows `Z·G_D = G`.
    pub equalities: usize,
}

/// `G_{αβ} = [(diag(v)α)ᵀ⊗I_n, (diag(β)Sα)ᵀ⊗I_n]` and `h_{αβ} = v − η·1`.
///
/// Row `i` of `G_{αβ}·[vec(A); vec(B)]` equals
/// `Σ_j α_j (A_ij v_j + Σ_k β_k B_ik S_kj)`.
pub fn build_sign_polytope_rows(
    v: &[LinExpr],
    s: &[Vec<LinExpr>],
    alpha: &[f64],
    beta: &[f64],
    eta: f64,
) -> Result<(Vec<Vec<LinExpr>>, Vec<LinExpr>)> {
    let g = sign_rows(v, s, alpha, beta)?;
    let h = v.iter().map(|vi| vi.clone() - LinExpr::constant(eta)).collect();
    Ok((g, h))
}

fn sign_rows(v: &[LinExpr], s: &[Vec<LinExpr>], alpha: &[f64], beta: &[f64]) -> Result<Vec<Vec<LinExpr>>> {
    let n = v.len();
    let m = s.len();
    if alpha.len() != n || beta.len() != m || s.iter().any(|row| row.len() != n) {
        return Err(Error::dim("alpha, beta, v and S sizes disagree"));
    }
    if alpha.iter().any(|a| a.abs() != 1.0) {
        return Err(Error::domain("alpha entries must be ±1"));
    }
    if beta.iter().any(|b| !b.is_finite() || *b < 0.0) {
        return Err(Error::domain("beta entries must be finite and nonnegative"));
    }
    let d = n * (n + m);
    // (diag(v)α)ᵀ and (diag(β)Sα)ᵀ
    let w: Vec<LinExpr> = (0..n).map(|j| v[j].clone() * alpha[j]).collect();
    let y: Vec<LinExpr> = (0..m)
        .map(|k| {
            let mut e = LinExpr::zero();
            for j in 0..n {
                e.add_scaled(&s[k][j], beta[k] * alpha[j]);
            }
            e
        })
        .collect();
    Ok((0..n)
        .map(|i| {
            let mut row = vec![LinExpr::zero(); d];
            for j in 0..n {
                row[i + n * j] = w[j].clone();
            }
            for k in 0..m {
                row[n * n + i + n * k] = y[k].clone();
            }
            row
        })
        .collect())
}

fn assemble(
    model: &mut LpModel,
    source: &FarkasSource<'_>,
    vars: &CertVars,
    vertices: &[Vec<f64>],
) -> Result<Vec<(Vec<f64>, Vec<f64>, FarkasBlock)>> {
    let n = vars.n();
    let h: Vec<LinExpr> = (0..n).map(|i| vars.row_bound(i)).collect();
    let mut blocks = Vec::with_capacity((1 << n) * vertices.len());
    for alpha in sign_vectors(n) {
        for beta in vertices {
            let g = sign_rows(&vars.v, &vars.s, &alpha, beta)?;
            let block = source.add_block(model, &g, &h)?;
            blocks.push((alpha.clone(), beta.clone(), block));
        }
    }
    Ok(blocks)
}

pub(crate) fn ensure_nonempty(polytope: &Polytope) -> Result<()> {
    max_linear_over_polytope(&vec![0.0; polytope.dim()], polytope).map(|_| ())
}

/// Sign-based robust program over the consistency polytope.
///
/// On success every plant in `polytope` satisfies all `n·2^{n+m}` robust
/// inequalities for the returned `(v, S)`.
pub fn synthesize_sign(
    polytope: &Polytope,
    options: &SynthesisOptions,
) -> Result<SynthesisOutcome<SignCertificate>> {
    let prog = options.program(polytope)?;
    check_sign_guard(prog.n, prog.m)?;
    ensure_nonempty(polytope)?;
    let source = FarkasSource::new(polytope);
    let vertices = options.spec.vertices();
    let out = run_program(&prog, |model, vars| assemble(model, &source, vars, &vertices))?;
    Ok(out.map(|solved| {
        let blocks = if options.keep_multipliers {
            solved
                .handles
                .iter()
                .map(|(alpha, beta, b)| MultiplierBlock {
                    alpha: alpha.clone(),
                    beta: beta.clone(),
                    z: b.values(&solved.solution),
                })
                .collect()
        } else {
            Vec::new()
        };
        SignCertificate {
            cert: solved.cert,
            blocks,
        }
    }))
}

/// Table counts for the sign-based program with `L` data faces.
pub fn count_constraints_sign(n: usize, m: usize, l: usize) -> ConstraintCounts {
    let blocks = 1usize << (n + m);
    ConstraintCounts {
        robust_inequalities: n * blocks,
        farkas_variables: n * l * blocks,
        equalities: n * n * (n + m) * blocks,
    }
}

/// Counts read off the feasibility model actually assembled for `polytope`.
pub fn assembled_counts_sign(polytope: &Polytope, spec: &QuantizerSpec) -> Result<ConstraintCounts> {
    let m = spec.channels();
    let n = state_dim(polytope.dim(), m)?;
    check_sign_guard(n, m)?;
    let mut model = LpModel::new();
    let vars = CertVars::declare(&mut model, n, m, StabilityMode::Ss, DEFAULT_ETA);
    let before = model.num_vars();
    let source = FarkasSource::new(polytope);
    let blocks = assemble(&mut model, &source, &vars, &spec.vertices())?;
    debug_assert_eq!(blocks.len(), 1 << (n + m));
    Ok(ConstraintCounts {
        robust_inequalities: model.num_inequalities(),
        farkas_variables: model.num_vars() - before,
        equalities: model.num_equalities(),
    })
}
