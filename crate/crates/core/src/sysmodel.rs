//! Discrete-time plants `x⁺ = A x + B u`, closed-loop superstability
//! metrics, certificates and quantized simulation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{inf_norm, matrix_from_rows, matrix_to_rows};
use crate::program::StabilityMode;
use crate::quantizer::QuantizerSpec;

/// Simulations abort once `‖x_t‖∞` exceeds this.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// Absolute slack used by [`decay_check`].
pub const DECAY_SLACK: f64 = 1e-9;

/// Slack allowed by [`check_cert`] for LP round-off.
pub const CERT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct LinearSystem {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

impl LinearSystem {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::dim(format!("A is {}x{}", a.nrows(), a.ncols())));
        }
        if b.nrows() != a.nrows() {
            return Err(Error::dim(format!(
                "B has {} rows but A has {}",
                b.nrows(),
                a.nrows()
            )));
        }
        if a.iter().chain(b.iter()).any(|x| !x.is_finite()) {
            return Err(Error::domain("plant matrices must be finite"));
        }
        Ok(Self { a, b })
    }

    pub fn from_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Result<Self> {
        let a = matrix_from_rows(a, 0)?;
        let b = matrix_from_rows(b, 0)?;
        // `[[], [], []]` describes an n×0 input matrix
        let b = if b.nrows() == 0 && a.nrows() > 0 {
            DMatrix::zeros(a.nrows(), 0)
        } else {
            b
        };
        Self::new(a, b)
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.b.ncols()
    }

    /// `A + B·diag(β)·K`
    pub fn closed_loop(&self, k: &DMatrix<f64>, beta: &[f64]) -> Result<DMatrix<f64>> {
        if k.nrows() != self.m() || k.ncols() != self.n() || beta.len() != self.m() {
            return Err(Error::dim(format!(
                "controller {}x{} / {} scales for plant n={}, m={}",
                k.nrows(),
                k.ncols(),
                beta.len(),
                self.n(),
                self.m()
            )));
        }
        let scaled = DMatrix::from_fn(k.nrows(), k.ncols(), |r, c| beta[r] * k[(r, c)]);
        Ok(&self.a + &self.b * scaled)
    }
}

impl Serialize for LinearSystem {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            #[serde(rename = "A")]
            a: Vec<Vec<f64>>,
            #[serde(rename = "B")]
            b: Vec<Vec<f64>>,
        }
        Repr {
            a: matrix_to_rows(&self.a),
            b: matrix_to_rows(&self.b),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for LinearSystem {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            #[serde(rename = "A")]
            a: Vec<Vec<f64>>,
            #[serde(rename = "B")]
            b: Vec<Vec<f64>>,
        }
        let r = Repr::deserialize(deserializer)?;
        LinearSystem::from_rows(&r.a, &r.b).map_err(serde::de::Error::custom)
    }
}

/// Superstability certificate `(v, S, M, λ, η)` and the controller it yields.
#[derive(Debug, Clone, PartialEq)]
pub struct StabCertificate {
    pub v: DVector<f64>,
    /// `m×n`
    pub s: DMatrix<f64>,
    /// Elementwise bound on every vertex closed loop, when the synthesis
    /// produced one.
    pub m: Option<DMatrix<f64>>,
    pub lambda: f64,
    pub eta: f64,
    /// `K = S·diag(1./v)`
    pub k: DMatrix<f64>,
    pub mode: StabilityMode,
}

impl StabCertificate {
    /// Assembles a certificate, recovering `K` from `(S, v)`.
    pub fn new(
        v: DVector<f64>,
        s: DMatrix<f64>,
        m: Option<DMatrix<f64>>,
        lambda: f64,
        eta: f64,
        mode: StabilityMode,
    ) -> Result<Self> {
        let k = recover_controller(&s, &v)?;
        Ok(Self {
            v,
            s,
            m,
            lambda,
            eta,
            k,
            mode,
        })
    }
}

/// `K = S·diag(1./v)`
pub fn recover_controller(s: &DMatrix<f64>, v: &DVector<f64>) -> Result<DMatrix<f64>> {
    if s.ncols() != v.len() {
        return Err(Error::dim(format!(
            "S has {} columns, v has {} entries",
            s.ncols(),
            v.len()
        )));
    }
    check_weights(v)?;
    Ok(DMatrix::from_fn(s.nrows(), s.ncols(), |k, j| s[(k, j)] / v[j]))
}

fn check_weights(v: &DVector<f64>) -> Result<()> {
    if let Some(bad) = v.iter().find(|x| !(**x > 0.0)) {
        return Err(Error::domain(format!("weights must be positive, found {bad}")));
    }
    Ok(())
}

/// `‖diag(v)⁻¹·Acl·diag(v)‖∞ = max_i Σ_j |Acl_ij|·v_j / v_i`
pub fn scaled_infty_norm(acl: &DMatrix<f64>, v: &DVector<f64>) -> Result<f64> {
    if !acl.is_square() || acl.nrows() != v.len() {
        return Err(Error::dim("closed loop and weights disagree"));
    }
    check_weights(v)?;
    Ok((0..acl.nrows())
        .map(|i| (0..acl.ncols()).map(|j| acl[(i, j)].abs() * v[j]).sum::<f64>() / v[i])
        .fold(0.0, f64::max))
}

/// Worst scaled ∞-norm over all sector vertices `A + B·diag(β)·K`.
pub fn closed_loop_vertex_gain(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    v: &DVector<f64>,
    spec: &QuantizerSpec,
) -> Result<f64> {
    if spec.channels() != sys.m() {
        return Err(Error::dim("quantizer channels differ from plant inputs"));
    }
    spec.vertices().iter().try_fold(0.0f64, |worst, beta| {
        Ok(worst.max(scaled_infty_norm(&sys.closed_loop(k, beta)?, v)?))
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<DVector<f64>>,
    pub diverged: bool,
}

impl Trajectory {
    /// CSV with header `t,x1..xn`.
    pub fn to_csv(&self) -> String {
        let n = self.states.first().map_or(0, |x| x.len());
        let mut out = String::from("t");
        for i in 1..=n {
            out.push_str(&format!(",x{i}"));
        }
        out.push('\n');
        for (t, x) in self.states.iter().enumerate() {
            out.push_str(&t.to_string());
            for v in x.iter() {
                out.push_str(&format!(",{v:e}"));
            }
            out.push('\n');
        }
        out
    }
}

/// Runs `x_{t+1} = A x_t + B g(K x_t)` for `horizon` steps.
pub fn simulate_quantized(
    sys: &LinearSystem,
    k: &DMatrix<f64>,
    spec: &QuantizerSpec,
    x0: &DVector<f64>,
    horizon: usize,
) -> Result<Trajectory> {
    if x0.len() != sys.n() || k.nrows() != sys.m() || k.ncols() != sys.n() {
        return Err(Error::dim("initial state or controller does not fit the plant"));
    }
    if spec.channels() != sys.m() {
        return Err(Error::dim("quantizer channels differ from plant inputs"));
    }
    let mut states = Vec::with_capacity(horizon + 1);
    states.push(x0.clone());
    for _ in 0..horizon {
        let x = states.last().expect("trajectory starts non-empty");
        let u = k * x;
        let uq = DVector::from_vec(spec.quantize(u.as_slice())?);
        let next = sys.a() * x + sys.b() * uq;
        let bad = next.iter().any(|v| !v.is_finite()) || inf_norm(&next) > DIVERGENCE_LIMIT;
        if bad {
            return Ok(Trajectory {
                states,
                diverged: true,
            });
        }
        states.push(next);
    }
    Ok(Trajectory {
        states,
        diverged: false,
    })
}

/// Result of [`check_cert`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CertCheck {
    pub valid: bool,
    /// Row-sum slack `min_i v_i − η − Σ_j M_ij`, or the most negative
    /// envelope slack when some envelope is violated.
    pub margin: f64,
}

/// Checks `|A·Y + B·diag(β)·S| ≤ M` at every sector vertex and
/// `Σ_j M_ij ≤ v_i − η`.
///
/// When the certificate carries no `M`, the smallest admissible one (the
/// elementwise maximum of the vertex envelopes) is used.
pub fn check_cert(
    sys: &LinearSystem,
    cert: &StabCertificate,
    spec: &QuantizerSpec,
) -> Result<CertCheck> {
    let (n, m) = (sys.n(), sys.m());
    if cert.v.len() != n || cert.s.nrows() != m || cert.s.ncols() != n || spec.channels() != m {
        return Err(Error::dim("certificate does not fit the plant"));
    }
    check_weights(&cert.v)?;
    let y = DMatrix::from_diagonal(&cert.v);
    let envelopes: Vec<DMatrix<f64>> = spec
        .vertices()
        .iter()
        .map(|beta| {
            let bs = DMatrix::from_fn(m, n, |k, j| beta[k] * cert.s[(k, j)]);
            (sys.a() * &y + sys.b() * bs).abs()
        })
        .collect();
    let bound = match &cert.m {
        Some(mm) => {
            if mm.nrows() != n || mm.ncols() != n {
                return Err(Error::dim("M must be n×n"));
            }
            mm.clone()
        }
        None => envelopes
            .iter()
            .fold(DMatrix::zeros(n, n), |acc, e| acc.sup(e)),
    };
    let envelope_slack = envelopes
        .iter()
        .map(|e| (&bound - e).min())
        .fold(f64::INFINITY, f64::min);
    let row_slack = (0..n)
        .map(|i| cert.v[i] - cert.eta - bound.row(i).sum())
        .fold(f64::INFINITY, f64::min);
    // a violated envelope dominates; otherwise the row sums decide
    let margin = if envelope_slack < 0.0 {
        envelope_slack.min(row_slack)
    } else {
        row_slack
    };
    Ok(CertCheck {
        valid: margin >= -CERT_TOL,
        margin,
    })
}

/// `‖x_t./v‖∞ ≤ λᵗ‖x_0./v‖∞` for every step, with absolute slack
/// [`DECAY_SLACK`].
pub fn decay_check(traj: &Trajectory, v: &DVector<f64>, lambda: f64) -> bool {
    let weighted = |x: &DVector<f64>| {
        x.iter()
            .zip(v.iter())
            .fold(0.0f64, |acc, (xi, vi)| acc.max((xi / vi).abs()))
    };
    let Some(x0) = traj.states.first() else {
        return true;
    };
    let start = weighted(x0);
    let mut rate = 1.0;
    for x in &traj.states {
        if weighted(x) > rate * start + DECAY_SLACK {
            return false;
        }
        rate *= lambda;
    }
    true
}
