//! Interval datasets and the polytope of plants consistent with them.
//!
//! The decision vector is `z = [vec(A); vec(B)]` with column-wise
//! vectorization, so `A_ij` sits at `i + n·j` and `B_ik` at `n² + i + n·k`.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::plant_vector;
use crate::lp::{max_linear_over_rows, Polytope, Support};
use crate::quantizer::{finite_or_none, interval_quantize, Partition};
use crate::sysmodel::LinearSystem;

/// Slack used by [`contains_plant`].
pub const MEMBERSHIP_TOL: f64 = 1e-9;

/// Support-value slack used by [`prune_redundant`].
pub const PRUNE_TOL: f64 = 1e-8;

/// One observed transition: state `x`, input `u`, and the interval `[p, q]`
/// containing the successor state.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSample {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    /// Lower bounds, `−∞` allowed.
    pub p: Vec<f64>,
    /// Upper bounds, `+∞` allowed.
    pub q: Vec<f64>,
}

impl DataSample {
    fn validate(&self, n: usize, m: usize) -> Result<()> {
        if self.x.len() != n || self.u.len() != m || self.p.len() != n || self.q.len() != n {
            return Err(Error::dim(format!(
                "sample does not match state dimension {n} and input dimension {m}"
            )));
        }
        if self.x.iter().chain(&self.u).any(|v| !v.is_finite()) {
            return Err(Error::domain("sample state and input must be finite"));
        }
        if self.p.iter().any(|v| v.is_nan() || *v == f64::INFINITY)
            || self.q.iter().any(|v| v.is_nan() || *v == f64::NEG_INFINITY)
        {
            return Err(Error::domain("interval bounds point the wrong way"));
        }
        if self.p.iter().zip(&self.q).any(|(p, q)| p > q) {
            return Err(Error::domain("sample has p > q"));
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct SampleRepr {
    x: Vec<f64>,
    u: Vec<f64>,
    p: Vec<Option<f64>>,
    q: Vec<Option<f64>>,
}

impl Serialize for DataSample {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        SampleRepr {
            x: self.x.clone(),
            u: self.u.clone(),
            p: self.p.iter().map(|&v| finite_or_none(v)).collect(),
            q: self.q.iter().map(|&v| finite_or_none(v)).collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for DataSample {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let r = SampleRepr::deserialize(deserializer)?;
        Ok(DataSample {
            x: r.x,
            u: r.u,
            p: r.p.into_iter().map(|v| v.unwrap_or(f64::NEG_INFINITY)).collect(),
            q: r.q.into_iter().map(|v| v.unwrap_or(f64::INFINITY)).collect(),
        })
    }
}

/// Samples plus the process-noise radius `ε` that widens every finite bound
/// when the polytope is built.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub excitation: Option<Excitation>,
    pub samples: Vec<DataSample>,
}

impl Dataset {
    pub fn new(samples: Vec<DataSample>, epsilon: f64) -> Result<Self> {
        let ds = Self {
            epsilon,
            seed: None,
            excitation: None,
            samples,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::domain("epsilon must be finite and nonnegative"));
        }
        if let Some((n, m)) = self.dims() {
            for s in &self.samples {
                s.validate(n, m)?;
            }
        }
        Ok(())
    }

    /// `(n, m)` of the first sample.
    pub fn dims(&self) -> Option<(usize, usize)> {
        self.samples.first().map(|s| (s.x.len(), s.u.len()))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// The first `t` samples.
    pub fn prefix(&self, t: usize) -> Dataset {
        Dataset {
            samples: self.samples[..t.min(self.samples.len())].to_vec(),
            ..self.clone()
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ds: Dataset = serde_json::from_str(s)?;
        ds.validate()?;
        Ok(ds)
    }
}

/// Distribution of the probing states and inputs. Each coordinate is drawn
/// uniformly; additive process noise is uniform in `[−noise, noise]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Excitation {
    pub x_range: (f64, f64),
    pub u_range: (f64, f64),
    pub noise: f64,
}

impl Default for Excitation {
    fn default() -> Self {
        Self {
            x_range: (-2.0, 2.0),
            u_range: (-2.0, 2.0),
            noise: 0.0,
        }
    }
}

impl Excitation {
    fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo <= hi;
        if !ok(self.x_range) || !ok(self.u_range) || !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::domain("invalid excitation ranges"));
        }
        Ok(())
    }
}

/// Draws `t` transitions of `sys` and bins each successor state.
///
/// The recorded `epsilon` equals the excitation noise radius, so the true
/// plant always lies in the resulting polytope.
pub fn generate_dataset(
    sys: &LinearSystem,
    partition: &Partition,
    t: usize,
    seed: u64,
    excitation: &Excitation,
) -> Result<Dataset> {
    excitation.validate()?;
    let (n, m) = (sys.n(), sys.m());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw = |rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..=hi)
        }
    };
    let mut samples = Vec::with_capacity(t);
    for _ in 0..t {
        let x: Vec<f64> = (0..n).map(|_| draw(&mut rng, excitation.x_range)).collect();
        let u: Vec<f64> = (0..m).map(|_| draw(&mut rng, excitation.u_range)).collect();
        let mut next = sys.a() * DVector::from_column_slice(&x) + sys.b() * DVector::from_column_slice(&u);
        for v in next.iter_mut() {
            *v += draw(&mut rng, (-excitation.noise, excitation.noise));
        }
        let mut p = Vec::with_capacity(n);
        let mut q = Vec::with_capacity(n);
        for &v in next.iter() {
            let bin = interval_quantize(v, partition)?;
            p.push(bin.lower);
            q.push(bin.upper);
        }
        samples.push(DataSample { x, u, p, q });
    }
    Ok(Dataset {
        epsilon: excitation.noise,
        seed: Some(seed),
        excitation: Some(*excitation),
        samples,
    })
}

/// Replaces every `[p, q]` by `[p − ε, q + ε]`. The recorded `epsilon` field
/// is left untouched.
pub fn widen_noise(dataset: &Dataset, epsilon: f64) -> Result<Dataset> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::domain(format!("epsilon must be nonnegative, got {epsilon}")));
    }
    let mut out = dataset.clone();
    for s in &mut out.samples {
        // infinite endpoints absorb the shift unchanged
        s.p.iter_mut().for_each(|p| *p -= epsilon);
        s.q.iter_mut().for_each(|q| *q += epsilon);
    }
    Ok(out)
}

/// `G_D z ≤ h_D` over `z = [vec(A); vec(B)]`.
///
/// Row order: all lower-bound rows (sample-major, state-minor), then all
/// upper-bound rows. Rows with an infinite bound are dropped. The dataset's
/// `epsilon` widens every finite bound.
pub fn build_polytope(dataset: &Dataset) -> Result<Polytope> {
    dataset.validate()?;
    let (n, m) = dataset.dims().ok_or(Error::EmptyDataset)?;
    let d = n * (n + m);
    let eps = dataset.epsilon;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::new();
    for upper in [false, true] {
        for s in &dataset.samples {
            for i in 0..n {
                let bound = if upper { s.q[i] + eps } else { -(s.p[i] - eps) };
                if !bound.is_finite() {
                    continue;
                }
                let sign = if upper { 1.0 } else { -1.0 };
                // row i of (xᵀ⊗I_n | uᵀ⊗I_n)
                let mut g = vec![0.0; d];
                for (j, xj) in s.x.iter().enumerate() {
                    g[i + n * j] = sign * xj;
                }
                for (k, uk) in s.u.iter().enumerate() {
                    g[n * n + i + n * k] = sign * uk;
                }
                rows.push((g, bound));
            }
        }
    }
    let g = DMatrix::from_fn(rows.len(), d, |r, c| rows[r].0[c]);
    Polytope::new(g, rows.into_iter().map(|r| r.1).collect())
}

/// Whether `(A, B)` satisfies every row of `polytope` up to
/// [`MEMBERSHIP_TOL`].
pub fn contains_plant(polytope: &Polytope, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n || n * (n + b.ncols()) != polytope.dim() {
        return Err(Error::dim("plant does not match the polytope dimension"));
    }
    Ok(polytope.contains(&plant_vector(a, b), MEMBERSHIP_TOL))
}

/// Drops rows implied by the others.
///
/// Rows are visited in order; row `r` is removed when the maximum of its
/// left-hand side over the currently retained rows other than `r` is at most
/// `h_r + PRUNE_TOL·max(1, |h_r|)`. Each LP is restricted to the connected
/// component of the row/variable incidence graph that contains `r`; this
/// gives the same answer as the full LP because the other components do not
/// interact with it.
pub fn prune_redundant(polytope: &Polytope) -> Result<Polytope> {
    let l = polytope.faces();
    let d = polytope.dim();
    // emptiness check on the full system
    max_linear_over_rows(&vec![0.0; d], polytope, None)?;

    let components = row_components(polytope);
    let mut retained = vec![true; l];
    for rows in &components {
        for &r in rows {
            let g: Vec<f64> = polytope.g().row(r).iter().copied().collect();
            let h = polytope.h()[r];
            let others: Vec<usize> = rows
                .iter()
                .copied()
                .filter(|&o| o != r && retained[o])
                .collect();
            let redundant = if g.iter().all(|&v| v == 0.0) {
                h >= 0.0
            } else {
                match max_linear_over_rows(&g, polytope, Some(&others))? {
                    Support::Bounded { value, .. } => value <= h + PRUNE_TOL * h.abs().max(1.0),
                    Support::Unbounded => false,
                }
            };
            if redundant {
                retained[r] = false;
            }
        }
    }
    let keep: Vec<usize> = (0..l).filter(|&r| retained[r]).collect();
    Ok(polytope.select_rows(&keep))
}

/// Groups row indices by connected component of the bipartite
/// row/variable graph. Zero rows form singleton components. Rows inside each
/// group keep their original order.
fn row_components(polytope: &Polytope) -> Vec<Vec<usize>> {
    let d = polytope.dim();
    let mut parent: Vec<usize> = (0..d).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let supports: Vec<Vec<usize>> = (0..polytope.faces())
        .map(|r| {
            polytope
                .g()
                .row(r)
                .iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(c, _)| c)
                .collect()
        })
        .collect();
    for s in &supports {
        for w in s.windows(2) {
            let (a, b) = (find(&mut parent, w[0]), find(&mut parent, w[1]));
            parent[a] = b;
        }
    }
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    let mut zero_rows = Vec::new();
    for (r, s) in supports.iter().enumerate() {
        let Some(&c) = s.first() else {
            zero_rows.push(vec![r]);
            continue;
        };
        let root = find(&mut parent, c);
        match groups.iter_mut().find(|(k, _)| *k == root) {
            Some((_, rows)) => rows.push(r),
            None => groups.push((root, vec![r])),
        }
    }
    groups.into_iter().map(|(_, rows)| rows).chain(zero_rows).collect()
}
