//! Logarithmic input quantization and interval quantization of measurements.
//!
//! A logarithmic quantizer with density `ρ ∈ (0, 1)` maps a nonzero scalar to
//! `sign(z)·ρ^i`, where level `ρ^i` covers `[ρ^i/(1+δ), ρ^i/(1−δ)]` and
//! `δ = (1−ρ)/(1+ρ)`. The error then obeys the sector bound
//! `|z − g(z)| ≤ δ|z|`. Levels range over all integers so every nonzero value
//! is covered.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// Sector bound of a logarithmic quantizer with density `rho`.
pub fn delta_from_rho(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(Error::domain(format!("density {rho} outside (0, 1]")));
    }
    Ok((1.0 - rho) / (1.0 + rho))
}

/// Scalar logarithmic quantizer `g_ρ(z)`.
///
/// `rho = 1` passes `z` through unchanged. Adjacent level intervals share a
/// boundary; a value on the boundary is mapped to the larger level.
pub fn log_quantize(z: f64, rho: f64) -> Result<f64> {
    let delta = delta_from_rho(rho)?;
    if !z.is_finite() {
        return Err(Error::domain(format!("cannot quantize non-finite value {z}")));
    }
    if rho == 1.0 || z == 0.0 {
        return Ok(z);
    }
    let a = z.abs();
    let guess = (a.ln() / rho.ln()).round() as i32;
    // The candidate window absorbs any drift in the logarithm; membership is
    // decided by the sector inequality itself.
    let level = (guess - 2..=guess + 2)
        .map(|i| rho.powi(i))
        .find(|&q| (a - q).abs() <= delta * a)
        .unwrap_or_else(|| nearest_level(a, rho, guess));
    Ok(level.copysign(z))
}

// Only reachable for values at the edge of the representable range.
fn nearest_level(a: f64, rho: f64, guess: i32) -> f64 {
    (guess - 2..=guess + 2)
        .map(|i| rho.powi(i))
        .min_by(|x, y| (a - x).abs().total_cmp(&(a - y).abs()))
        .unwrap_or(a)
}

/// Per-channel densities and their sector bounds.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizerSpec {
    rho: Vec<f64>,
    delta: Vec<f64>,
}

impl QuantizerSpec {
    pub fn new(rho: Vec<f64>) -> Result<Self> {
        let delta = rho
            .iter()
            .map(|&r| delta_from_rho(r))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { rho, delta })
    }

    /// Same density on all `m` channels.
    pub fn uniform(m: usize, rho: f64) -> Result<Self> {
        Self::new(vec![rho; m])
    }

    /// No quantization (`ρ = 1`, `δ = 0`) on `m` channels.
    pub fn identity(m: usize) -> Self {
        Self {
            rho: vec![1.0; m],
            delta: vec![0.0; m],
        }
    }

    /// Builds a spec directly from sector bounds `δ_j ∈ [0, 1)`.
    pub fn from_delta(delta: Vec<f64>) -> Result<Self> {
        if let Some(d) = delta.iter().find(|d| !(**d >= 0.0 && **d < 1.0)) {
            return Err(Error::domain(format!("sector bound {d} outside [0, 1)")));
        }
        let rho = delta.iter().map(|d| (1.0 - d) / (1.0 + d)).collect();
        Ok(Self { rho, delta })
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn delta(&self) -> &[f64] {
        &self.delta
    }

    pub fn channels(&self) -> usize {
        self.rho.len()
    }

    /// The `2^m` sector vertices `β ∈ ∏_j {1−δ_j, 1+δ_j}`.
    ///
    /// Bit `k` of the vertex index selects `1+δ_k`. Duplicates are kept when
    /// some `δ_k = 0` so that the vertex count is always `2^m`.
    pub fn vertices(&self) -> Vec<Vec<f64>> {
        let m = self.delta.len();
        (0..1usize << m)
            .map(|code| {
                (0..m)
                    .map(|k| {
                        if code >> k & 1 == 1 {
                            1.0 + self.delta[k]
                        } else {
                            1.0 - self.delta[k]
                        }
                    })
                    .collect()
            })
            .collect()
    }

    /// Elementwise quantization of an input vector.
    pub fn quantize(&self, u: &[f64]) -> Result<Vec<f64>> {
        if u.len() != self.rho.len() {
            return Err(Error::dim(format!(
                "input has {} channels, quantizer has {}",
                u.len(),
                self.rho.len()
            )));
        }
        u.iter()
            .zip(&self.rho)
            .map(|(&z, &r)| log_quantize(z, r))
            .collect()
    }
}

/// Elementwise quantization of `u` under `spec`.
pub fn log_quantize_vector(u: &[f64], spec: &QuantizerSpec) -> Result<Vec<f64>> {
    spec.quantize(u)
}

impl Serialize for QuantizerSpec {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            rho: &'a [f64],
            delta: &'a [f64],
        }
        Repr {
            rho: &self.rho,
            delta: &self.delta,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for QuantizerSpec {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            rho: Vec<f64>,
        }
        let repr = Repr::deserialize(deserializer)?;
        QuantizerSpec::new(repr.rho).map_err(serde::de::Error::custom)
    }
}

/// Closed interval with possibly infinite endpoints.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            lower: Option<f64>,
            upper: Option<f64>,
        }
        Repr {
            lower: finite_or_none(self.lower),
            upper: finite_or_none(self.upper),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            lower: Option<f64>,
            upper: Option<f64>,
        }
        let r = Repr::deserialize(deserializer)?;
        Ok(Interval {
            lower: r.lower.unwrap_or(f64::NEG_INFINITY),
            upper: r.upper.unwrap_or(f64::INFINITY),
        })
    }
}

pub(crate) fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Bins `(−∞, e_1], [e_1, e_2], …, [e_k, ∞)` given by strictly increasing
/// finite edges.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    edges: Vec<f64>,
}

impl Partition {
    pub fn new(edges: Vec<f64>) -> Result<Self> {
        if edges.iter().any(|e| !e.is_finite()) {
            return Err(Error::domain("partition edges must be finite"));
        }
        if edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain("partition edges must be strictly increasing"));
        }
        Ok(Self { edges })
    }

    /// Edges `lo, lo + step, …, hi`. Edge values are computed as
    /// `lo + k·step` to avoid accumulated drift.
    pub fn uniform(lo: f64, hi: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(hi >= lo) {
            return Err(Error::domain("uniform partition needs lo <= hi and step > 0"));
        }
        let count = ((hi - lo) / step + 1e-9).floor() as usize;
        Self::new((0..=count).map(|k| lo + k as f64 * step).collect())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    /// Number of bins, including the two unbounded end bins.
    pub fn bin_count(&self) -> usize {
        self.edges.len() + 1
    }
}

impl<'de> Deserialize<'de> for Partition {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            edges: Vec<f64>,
        }
        let r = Repr::deserialize(deserializer)?;
        Partition::new(r.edges).map_err(serde::de::Error::custom)
    }
}

/// The partition bin containing `value`.
///
/// A value equal to an edge lands in the bin that has that edge as its lower
/// endpoint.
pub fn interval_quantize(value: f64, partition: &Partition) -> Result<Interval> {
    if !value.is_finite() {
        return Err(Error::domain(format!("cannot bin non-finite value {value}")));
    }
    let edges = &partition.edges;
    if edges.is_empty() {
        return Ok(Interval {
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
        });
    }
    let k = edges.partition_point(|&e| e <= value);
    let interval = if k == 0 {
        Interval {
            lower: f64::NEG_INFINITY,
            upper: edges[0],
        }
    } else {
        Interval {
            lower: edges[k - 1],
            upper: edges.get(k).copied().unwrap_or(f64::INFINITY),
        }
    };
    Ok(interval)
}
