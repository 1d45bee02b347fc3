//! Independent audit of a candidate controller: every robust inequality is
//! checked by maximizing its left-hand side over the consistency polytope.
//!
//! Nothing here touches the Farkas machinery used by the synthesizers.

use nalgebra::{DMatrix, DVector};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{matrix_to_rows, sign_vectors, split_plant_vector};
use crate::lp::{max_linear_over_polytope, Polytope, Support};
use crate::nominal::check_sign_guard;
use crate::quantizer::QuantizerSpec;
use crate::synth_sign::state_dim;

/// Margins down to this value still count as verified.
pub const VERIFY_TOL: f64 = -1e-7;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WorstCase {
    pub i: usize,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    #[serde(rename = "A", serialize_with = "rows")]
    pub a: DMatrix<f64>,
    #[serde(rename = "B", serialize_with = "rows")]
    pub b: DMatrix<f64>,
}

fn rows<S: Serializer>(x: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    matrix_to_rows(x).serialize(s)
}

fn finite<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    x.is_finite().then_some(*x).serialize(s)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub verified: bool,
    /// `min v_i − η − support` over all robust inequalities; `−∞` (JSON null)
    /// when some support value is unbounded.
    #[serde(serialize_with = "finite")]
    pub worst_margin: f64,
    pub worst_case: Option<WorstCase>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

struct Probe {
    i: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    margin: f64,
    argmax: Option<Vec<f64>>,
}

/// Checks `max_{(A,B)∈P} Σ_j α_j (A_ij v_j + Σ_k β_k B_ik S_kj) ≤ v_i − η` for
/// every row `i`, sign vector `α` and sector vertex `β`.
pub fn robust_verify(
    polytope: &Polytope,
    v: &DVector<f64>,
    s: &DMatrix<f64>,
    spec: &QuantizerSpec,
    eta: f64,
) -> Result<VerificationReport> {
    let m = spec.channels();
    let n = state_dim(polytope.dim(), m)?;
    if v.len() != n || s.shape() != (m, n) {
        return Err(Error::dim("v and S do not fit the polytope"));
    }
    if v.iter().any(|&vi| !(vi > 0.0)) {
        return Err(Error::domain("weights v must be positive"));
    }
    check_sign_guard(n, m)?;
    let vertices = spec.vertices();
    let mut jobs = Vec::with_capacity(n << (n + m));
    for alpha in sign_vectors(n) {
        for beta in &vertices {
            for i in 0..n {
                jobs.push((i, alpha.clone(), beta.clone()));
            }
        }
    }
    let run = |(i, alpha, beta): &(usize, Vec<f64>, Vec<f64>)| -> Result<Probe> {
        let d = polytope.dim();
        let mut c = vec![0.0; d];
        for j in 0..n {
            c[i + n * j] = alpha[j] * v[j];
        }
        for k in 0..m {
            let sa: f64 = (0..n).map(|j| s[(k, j)] * alpha[j]).sum();
            c[n * n + i + n * k] = beta[k] * sa;
        }
        let support = max_linear_over_polytope(&c, polytope)?;
        let (margin, argmax) = match support {
            Support::Bounded { value, argmax } => (v[*i] - eta - value, Some(argmax)),
            Support::Unbounded => (f64::NEG_INFINITY, None),
        };
        Ok(Probe {
            i: *i,
            alpha: alpha.clone(),
            beta: beta.clone(),
            margin,
            argmax,
        })
    };

    #[cfg(feature = "parallel")]
    let probes: Vec<Result<Probe>> = {
        use rayon::prelude::*;
        jobs.par_iter().map(run).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let probes: Vec<Result<Probe>> = jobs.iter().map(run).collect();

    let mut worst: Option<Probe> = None;
    for p in probes {
        let p = p?;
        if worst.as_ref().is_none_or(|w| p.margin < w.margin) {
            worst = Some(p);
        }
    }
    let Some(worst) = worst else {
        return Ok(VerificationReport {
            verified: true,
            worst_margin: f64::INFINITY,
            worst_case: None,
            diagnostic: None,
        });
    };
    let diagnostic = worst.argmax.is_none().then(|| {
        format!(
            "support of inequality i = {} is unbounded: the data do not bound the plant in that direction",
            worst.i
        )
    });
    let worst_case = match &worst.argmax {
        Some(z) => {
            let (a, b) = split_plant_vector(z, n, m)?;
            Some(WorstCase {
                i: worst.i,
                alpha: worst.alpha.clone(),
                beta: worst.beta.clone(),
                a,
                b,
            })
        }
        None => None,
    };
    Ok(VerificationReport {
        verified: worst.margin >= VERIFY_TOL,
        worst_margin: worst.margin,
        worst_case,
        diagnostic,
    })
}

/// [`robust_verify`] for a controller `K` with weights `v`, using
/// `S = K·diag(v)`.
pub fn robust_verify_controller(
    polytope: &Polytope,
    k: &DMatrix<f64>,
    v: &DVector<f64>,
    spec: &QuantizerSpec,
    eta: f64,
) -> Result<VerificationReport> {
    if k.ncols() != v.len() {
        return Err(Error::dim("K and v disagree on the state dimension"));
    }
    let s = DMatrix::from_fn(k.nrows(), k.ncols(), |r, c| k[(r, c)] * v[c]);
    robust_verify(polytope, v, &s, spec, eta)
}
