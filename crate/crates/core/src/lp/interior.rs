//! Interior-point backend (the `clarabel` crate).

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT, SolverStatus, SupportedConeT, ZeroConeT,
};

use super::{Cmp, LpBackend, LpModel, LpSolution, LpStatus, DEFAULT_TOLERANCE};

/// Primal-dual interior-point method on the conic form
/// `min cᵀx, Ax + s = b, s ∈ {0}ᵖ × ℝ₊ᵠ`.
#[derive(Debug, Clone, Copy)]
pub struct InteriorPointBackend {
    pub tolerance: f64,
}

impl Default for InteriorPointBackend {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

/// Rows of `A` as (coefficients, rhs) before stacking.
#[derive(Default)]
struct Block {
    rows: Vec<(Vec<(usize, f64)>, f64)>,
}

impl Block {
    fn push(&mut self, terms: Vec<(usize, f64)>, rhs: f64) {
        self.rows.push((terms, rhs));
    }
}

impl LpBackend for InteriorPointBackend {
    fn name(&self) -> &'static str {
        "interior-point"
    }

    fn solve(&self, model: &LpModel) -> LpSolution {
        let n = model.num_vars();
        let mut eq = Block::default();
        let mut le = Block::default();
        for row in &model.rows {
            let terms: Vec<(usize, f64)> = row.terms.iter().map(|(v, c)| (v.0, *c)).collect();
            match row.cmp {
                Cmp::Eq => eq.push(terms, row.rhs),
                Cmp::Le => le.push(terms, row.rhs),
                Cmp::Ge => le.push(terms.into_iter().map(|(j, c)| (j, -c)).collect(), -row.rhs),
            }
        }
        for j in 0..n {
            let (lo, hi) = (model.lower[j], model.upper[j]);
            if lo == hi {
                eq.push(vec![(j, 1.0)], lo);
                continue;
            }
            if lo.is_finite() {
                le.push(vec![(j, -1.0)], -lo);
            }
            if hi.is_finite() {
                le.push(vec![(j, 1.0)], hi);
            }
        }

        let (p, q) = (eq.rows.len(), le.rows.len());
        let (mut ri, mut ci, mut vals, mut b) = (Vec::new(), Vec::new(), Vec::new(), Vec::with_capacity(p + q));
        for (r, (terms, rhs)) in eq.rows.iter().chain(&le.rows).enumerate() {
            for &(j, c) in terms {
                ri.push(r);
                ci.push(j);
                vals.push(c);
            }
            b.push(*rhs);
        }
        let a = CscMatrix::new_from_triplets(p + q, n, ri, ci, vals);
        let pmat = CscMatrix::zeros((n, n));
        let mut c = vec![0.0; n];
        for (v, coeff) in model.objective.normalized_terms() {
            c[v.0] = coeff;
        }
        let mut cones: Vec<SupportedConeT<f64>> = Vec::new();
        if p > 0 {
            cones.push(ZeroConeT(p));
        }
        if q > 0 {
            cones.push(NonnegativeConeT(q));
        }

        let settings = match DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(400)
            .build()
        {
            Ok(s) => s,
            Err(e) => return LpSolution::without_primal(LpStatus::NumericalFailure, Some(e.to_string())),
        };
        let mut solver = match DefaultSolver::new(&pmat, &c, &a, &b, &cones, settings) {
            Ok(s) => s,
            Err(e) => return LpSolution::without_primal(LpStatus::NumericalFailure, Some(e.to_string())),
        };
        solver.solve();
        let sol = &solver.solution;
        match sol.status {
            SolverStatus::Solved | SolverStatus::AlmostSolved => {
                // pull bounds back in; the iterate is interior up to rounding
                let x: Vec<f64> = sol
                    .x
                    .iter()
                    .enumerate()
                    .map(|(j, &x)| x.clamp(model.lower[j], model.upper[j]))
                    .collect();
                let violation = model.max_violation(&x);
                if !(violation <= self.tolerance) {
                    return LpSolution::without_primal(
                        LpStatus::NumericalFailure,
                        Some(format!("interior point violates constraints by {violation:e}")),
                    );
                }
                let objective = model.objective.eval(&x);
                LpSolution {
                    status: LpStatus::Optimal,
                    primal: Some(x),
                    objective: Some(objective),
                    message: None,
                }
            }
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                LpSolution::without_primal(LpStatus::Infeasible, None)
            }
            SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                LpSolution::without_primal(LpStatus::Unbounded, None)
            }
            other => LpSolution::without_primal(
                LpStatus::NumericalFailure,
                Some(format!("interior point stopped with {other:?}")),
            ),
        }
    }
}
