//! LP modelling layer, solver backend contract, Farkas containment blocks and
//! small brute-force polytope oracles.
//!
//! Synthesis code builds an [`LpModel`] out of [`LinExpr`] rows and hands it
//! to an [`LpBackend`]. The default backend ([`FallbackBackend`]) runs a
//! sparse simplex solver and hands the model to an interior-point solver when
//! the simplex result fails the residual check. Feasibility problems are
//! plain models without an objective.

mod interior;

pub use interior::InteriorPointBackend;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows};

/// Default primal feasibility tolerance used to validate backend output.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

/// Tolerance for vertex feasibility and deduplication in the brute-force
/// oracles.
pub const VERTEX_TOLERANCE: f64 = 1e-7;

/// Largest dimension accepted by [`enumerate_vertices`].
pub const MAX_ENUMERATION_DIM: usize = 6;

const MAX_ENUMERATION_SUBSETS: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarId(usize);

impl VarId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Affine expression `Σ c_k·x_k + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    terms: Vec<(VarId, f64)>,
    constant: f64,
}

impl LinExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: VarId, coeff: f64) -> Self {
        Self {
            terms: vec![(v, coeff)],
            constant: 0.0,
        }
    }

    pub fn sum(vars: impl IntoIterator<Item = VarId>) -> Self {
        Self {
            terms: vars.into_iter().map(|v| (v, 1.0)).collect(),
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, v: VarId, coeff: f64) {
        if coeff != 0.0 {
            self.terms.push((v, coeff));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, factor: f64) {
        if factor == 0.0 {
            return;
        }
        self.terms
            .extend(other.terms.iter().map(|&(v, c)| (v, c * factor)));
        self.constant += other.constant * factor;
    }

    pub fn constant_part(&self) -> f64 {
        self.constant
    }

    pub fn terms(&self) -> &[(VarId, f64)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(_, c)| *c == 0.0)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|(v, c)| c * x[v.0]).sum::<f64>()
    }

    /// Merges repeated variables and drops zero coefficients.
    fn normalized_terms(&self) -> Vec<(VarId, f64)> {
        let mut merged: BTreeMap<VarId, f64> = BTreeMap::new();
        for &(v, c) in &self.terms {
            *merged.entry(v).or_insert(0.0) += c;
        }
        merged.into_iter().filter(|(_, c)| *c != 0.0).collect()
    }
}

impl From<VarId> for LinExpr {
    fn from(v: VarId) -> Self {
        LinExpr::var(v)
    }
}

impl From<f64> for LinExpr {
    fn from(c: f64) -> Self {
        LinExpr::constant(c)
    }
}

impl AddAssign<&LinExpr> for LinExpr {
    fn add_assign(&mut self, rhs: &LinExpr) {
        self.add_scaled(rhs, 1.0);
    }
}

impl Add for LinExpr {
    type Output = LinExpr;
    fn add(mut self, rhs: LinExpr) -> LinExpr {
        self += &rhs;
        self
    }
}

impl Sub for LinExpr {
    type Output = LinExpr;
    fn sub(mut self, rhs: LinExpr) -> LinExpr {
        self.add_scaled(&rhs, -1.0);
        self
    }
}

impl Mul<f64> for LinExpr {
    type Output = LinExpr;
    fn mul(mut self, rhs: f64) -> LinExpr {
        if rhs == 0.0 {
            return LinExpr::zero();
        }
        for t in &mut self.terms {
            t.1 *= rhs;
        }
        self.constant *= rhs;
        self
    }
}

impl Neg for LinExpr {
    type Output = LinExpr;
    fn neg(self) -> LinExpr {
        self * -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cmp {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
struct Row {
    terms: Vec<(VarId, f64)>,
    cmp: Cmp,
    rhs: f64,
}

/// Linear program `min cᵀx` subject to equality and inequality rows and
/// variable bounds.
#[derive(Debug, Clone, Default)]
pub struct LpModel {
    lower: Vec<f64>,
    upper: Vec<f64>,
    rows: Vec<Row>,
    objective: LinExpr,
}

impl LpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(&mut self, lower: f64, upper: f64) -> VarId {
        self.lower.push(lower);
        self.upper.push(upper);
        VarId(self.lower.len() - 1)
    }

    pub fn add_free_var(&mut self) -> VarId {
        self.add_var(f64::NEG_INFINITY, f64::INFINITY)
    }

    pub fn add_vars(&mut self, count: usize, lower: f64, upper: f64) -> Vec<VarId> {
        (0..count).map(|_| self.add_var(lower, upper)).collect()
    }

    /// Adds `lhs cmp rhs`.
    pub fn add_constraint(&mut self, lhs: LinExpr, cmp: Cmp, rhs: LinExpr) {
        let diff = lhs - rhs;
        let terms = diff.normalized_terms();
        debug_assert!(terms.iter().all(|(v, _)| v.0 < self.lower.len()));
        self.rows.push(Row {
            terms,
            cmp,
            rhs: -diff.constant,
        });
    }

    pub fn minimize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn num_vars(&self) -> usize {
        self.lower.len()
    }

    pub fn num_equalities(&self) -> usize {
        self.rows.iter().filter(|r| r.cmp == Cmp::Eq).count()
    }

    pub fn num_inequalities(&self) -> usize {
        self.rows.len() - self.num_equalities()
    }

    pub fn bounds(&self, v: VarId) -> (f64, f64) {
        (self.lower[v.0], self.upper[v.0])
    }

    /// Largest scaled violation of rows and bounds at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (j, &xj) in x.iter().enumerate() {
            let scale = 1.0 + xj.abs();
            worst = worst
                .max((self.lower[j] - xj) / scale)
                .max((xj - self.upper[j]) / scale);
        }
        for row in &self.rows {
            let mut lhs = 0.0;
            let mut scale = 1.0 + row.rhs.abs();
            for (v, c) in &row.terms {
                lhs += c * x[v.0];
                scale += (c * x[v.0]).abs();
            }
            let v = match row.cmp {
                Cmp::Le => lhs - row.rhs,
                Cmp::Ge => row.rhs - lhs,
                Cmp::Eq => (lhs - row.rhs).abs(),
            };
            worst = worst.max(v / scale);
        }
        worst
    }

    /// CPLEX-LP style text dump for debugging.
    pub fn to_lp_text(&self) -> String {
        let mut out = String::from("Minimize\n obj:");
        write_terms(&mut out, &self.objective.normalized_terms());
        if self.objective.constant != 0.0 {
            let _ = write!(out, " + {}", self.objective.constant);
        }
        out.push_str("\nSubject To\n");
        for (i, row) in self.rows.iter().enumerate() {
            let _ = write!(out, " c{i}:");
            write_terms(&mut out, &row.terms);
            let op = match row.cmp {
                Cmp::Le => "<=",
                Cmp::Ge => ">=",
                Cmp::Eq => "=",
            };
            let _ = writeln!(out, " {op} {}", row.rhs);
        }
        out.push_str("Bounds\n");
        for (j, (lo, hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            let lo = if lo.is_finite() { lo.to_string() } else { "-inf".into() };
            let hi = if hi.is_finite() { hi.to_string() } else { "+inf".into() };
            let _ = writeln!(out, " {lo} <= x{j} <= {hi}");
        }
        out.push_str("End\n");
        out
    }
}

fn write_terms(out: &mut String, terms: &[(VarId, f64)]) {
    if terms.is_empty() {
        out.push_str(" 0");
    }
    for (v, c) in terms {
        let sign = if *c < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} x{}", c.abs(), v.0);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Present iff `status == Optimal`.
    pub primal: Option<Vec<f64>>,
    pub objective: Option<f64>,
    pub message: Option<String>,
}

impl LpSolution {
    fn without_primal(status: LpStatus, message: Option<String>) -> Self {
        Self {
            status,
            primal: None,
            objective: None,
            message,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.primal.as_ref().map_or(f64::NAN, |x| x[v.0])
    }

    pub fn eval(&self, e: &LinExpr) -> f64 {
        self.primal.as_ref().map_or(f64::NAN, |x| e.eval(x))
    }
}

/// A solver that can process any [`LpModel`].
pub trait LpBackend: Send + Sync {
    fn name(&self) -> &'static str;

    /// Never panics on solver trouble; failures become
    /// [`LpStatus::NumericalFailure`].
    fn solve(&self, model: &LpModel) -> LpSolution;
}

/// Sparse primal/dual simplex (the `microlp` crate).
#[derive(Debug, Clone, Copy)]
pub struct SimplexBackend {
    pub tolerance: f64,
}

impl Default for SimplexBackend {
    fn default() -> Self {
        Self {
            tolerance: DEFAULT_TOLERANCE,
        }
    }
}

impl LpBackend for SimplexBackend {
    fn name(&self) -> &'static str {
        "simplex"
    }

    fn solve(&self, model: &LpModel) -> LpSolution {
        use microlp::{ComparisonOp, OptimizationDirection, Problem, SolveOutcome};

        let mut obj = vec![0.0; model.num_vars()];
        for (v, c) in model.objective.normalized_terms() {
            obj[v.0] = c;
        }
        // Variables outside every row are settled here: the simplex reports
        // such free columns as unbounded even with a zero cost.
        let mut used = vec![false; model.num_vars()];
        for row in &model.rows {
            for (v, _) in &row.terms {
                used[v.0] = true;
            }
        }
        let mut fixed = vec![0.0; model.num_vars()];
        for j in (0..model.num_vars()).filter(|&j| !used[j]) {
            let (lo, hi, c) = (model.lower[j], model.upper[j], obj[j]);
            let value = if c > 0.0 {
                lo
            } else if c < 0.0 {
                hi
            } else {
                0.0f64.clamp(lo.min(hi), hi.max(lo))
            };
            if !value.is_finite() {
                return LpSolution::without_primal(LpStatus::Unbounded, None);
            }
            fixed[j] = value;
        }
        // Columns with an infinite lower bound are rewritten over
        // nonnegative variables; the simplex can cycle on free columns.
        let mut problem = Problem::new(OptimizationDirection::Minimize);
        let cols: Vec<Column> = (0..model.num_vars())
            .map(|j| {
                let (lo, hi, c) = (model.lower[j], model.upper[j], obj[j]);
                if !used[j] {
                    Column::Fixed(fixed[j])
                } else if lo.is_finite() {
                    Column::Direct(problem.add_var(c, (lo, hi)))
                } else if hi.is_finite() {
                    Column::Flipped(hi, problem.add_var(-c, (0.0, f64::INFINITY)))
                } else {
                    Column::Split(
                        problem.add_var(c, (0.0, f64::INFINITY)),
                        problem.add_var(-c, (0.0, f64::INFINITY)),
                    )
                }
            })
            .collect();
        for row in &model.rows {
            if row.terms.is_empty() {
                let ok = match row.cmp {
                    Cmp::Le => 0.0 <= row.rhs + self.tolerance,
                    Cmp::Ge => 0.0 >= row.rhs - self.tolerance,
                    Cmp::Eq => row.rhs.abs() <= self.tolerance,
                };
                if !ok {
                    return LpSolution::without_primal(
                        LpStatus::Infeasible,
                        Some("constant row violated".into()),
                    );
                }
                continue;
            }
            let op = match row.cmp {
                Cmp::Le => ComparisonOp::Le,
                Cmp::Ge => ComparisonOp::Ge,
                Cmp::Eq => ComparisonOp::Eq,
            };
            let mut rhs = row.rhs;
            let mut terms = Vec::with_capacity(row.terms.len());
            for &(v, c) in &row.terms {
                match cols[v.0] {
                    Column::Direct(x) => terms.push((x, c)),
                    Column::Flipped(hi, x) => {
                        rhs -= c * hi;
                        terms.push((x, -c));
                    }
                    Column::Split(p, q) => {
                        terms.push((p, c));
                        terms.push((q, -c));
                    }
                    Column::Fixed(_) => unreachable!("row variables are registered"),
                }
            }
            problem.add_constraint(terms, op, rhs);
        }
        match problem.solve() {
            Ok(SolveOutcome::Solution(sol)) => {
                let x: Vec<f64> = cols
                    .iter()
                    .map(|col| match *col {
                        Column::Fixed(f) => f,
                        Column::Direct(x) => sol.var_value(x),
                        Column::Flipped(hi, x) => hi - sol.var_value(x),
                        Column::Split(p, q) => sol.var_value(p) - sol.var_value(q),
                    })
                    .collect();
                let violation = model.max_violation(&x);
                if !(violation <= self.tolerance) {
                    return LpSolution::without_primal(
                        LpStatus::NumericalFailure,
                        Some(format!("solution violates constraints by {violation:e}")),
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
            Ok(SolveOutcome::Interrupted(_)) => LpSolution::without_primal(
                LpStatus::NumericalFailure,
                Some("solve interrupted".into()),
            ),
            Err(microlp::Error::Infeasible) => LpSolution::without_primal(LpStatus::Infeasible, None),
            Err(microlp::Error::Unbounded) => LpSolution::without_primal(LpStatus::Unbounded, None),
            Err(e) => LpSolution::without_primal(LpStatus::NumericalFailure, Some(e.to_string())),
        }
    }
}

#[derive(Clone, Copy)]
enum Column {
    Fixed(f64),
    Direct(microlp::Variable),
    /// `x = hi − y`, `y ≥ 0`
    Flipped(f64, microlp::Variable),
    /// `x = p − q`
    Split(microlp::Variable, microlp::Variable),
}

/// Simplex first; on a numerical failure the interior-point solver gets a
/// second attempt. Both results pass the same residual check.
#[derive(Debug, Clone, Copy, Default)]
pub struct FallbackBackend {
    pub primary: SimplexBackend,
    pub secondary: InteriorPointBackend,
}

impl LpBackend for FallbackBackend {
    fn name(&self) -> &'static str {
        "simplex+interior-point"
    }

    fn solve(&self, model: &LpModel) -> LpSolution {
        let first = self.primary.solve(model);
        if first.status != LpStatus::NumericalFailure {
            return first;
        }
        let second = self.secondary.solve(model);
        if second.status != LpStatus::NumericalFailure {
            return second;
        }
        LpSolution::without_primal(
            LpStatus::NumericalFailure,
            Some(format!(
                "{}: {}; {}: {}",
                self.primary.name(),
                first.message.unwrap_or_default(),
                self.secondary.name(),
                second.message.unwrap_or_default()
            )),
        )
    }
}

/// Solves with the default backend.
pub fn solve(model: &LpModel) -> LpSolution {
    FallbackBackend::default().solve(model)
}

/// `{x | G x ≤ h}`
#[derive(Debug, Clone, PartialEq)]
pub struct Polytope {
    g: DMatrix<f64>,
    h: Vec<f64>,
}

impl Polytope {
    pub fn new(g: DMatrix<f64>, h: Vec<f64>) -> Result<Self> {
        if g.nrows() != h.len() {
            return Err(Error::dim(format!(
                "G has {} rows but h has {} entries",
                g.nrows(),
                h.len()
            )));
        }
        if g.iter().chain(&h).any(|x| !x.is_finite()) {
            return Err(Error::domain("polytope data must be finite"));
        }
        Ok(Self { g, h })
    }

    /// Axis-aligned box `lo ≤ x ≤ hi`.
    pub fn from_box(lo: &[f64], hi: &[f64]) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::dim("box bounds differ in length"));
        }
        let d = lo.len();
        let g = DMatrix::from_fn(2 * d, d, |r, c| match (r < d, r % d == c) {
            (true, true) => 1.0,
            (false, true) => -1.0,
            _ => 0.0,
        });
        let h = hi.iter().copied().chain(lo.iter().map(|l| -l)).collect();
        Self::new(g, h)
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn h(&self) -> &[f64] {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.g.ncols()
    }

    /// Face count `L`.
    pub fn faces(&self) -> usize {
        self.h.len()
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && (0..self.faces()).all(|r| self.row_dot(r, x) <= self.h[r] + tol)
    }

    pub fn row_dot(&self, r: usize, x: &[f64]) -> f64 {
        self.g.row(r).iter().zip(x).map(|(g, x)| g * x).sum()
    }

    /// Keeps the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            g: self.g.select_rows(rows),
            h: rows.iter().map(|&r| self.h[r]).collect(),
        }
    }

    /// Nonzero entries of each column as `(row, value)`.
    pub(crate) fn column_nonzeros(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.dim())
            .map(|c| {
                self.g
                    .column(c)
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(r, v)| (r, *v))
                    .collect()
            })
            .collect()
    }
}

impl Serialize for Polytope {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            #[serde(rename = "G")]
            g: Vec<Vec<f64>>,
            h: &'a [f64],
        }
        Repr {
            g: matrix_to_rows(&self.g),
            h: &self.h,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Polytope {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            #[serde(rename = "G")]
            g: Vec<Vec<f64>>,
            h: Vec<f64>,
        }
        let r = Repr::deserialize(deserializer)?;
        let g = matrix_from_rows(&r.g, 0).map_err(serde::de::Error::custom)?;
        Polytope::new(g, r.h).map_err(serde::de::Error::custom)
    }
}

/// Nonnegative multipliers `Z` certifying `P₁ ⊆ P₂`.
#[derive(Debug, Clone)]
pub struct FarkasBlock {
    /// `L₂ × L₁` variable handles.
    pub z: Vec<Vec<VarId>>,
}

impl FarkasBlock {
    pub fn values(&self, sol: &LpSolution) -> Vec<Vec<f64>> {
        self.z
            .iter()
            .map(|row| row.iter().map(|&v| sol.value(v)).collect())
            .collect()
    }
}

/// Column sparsity of `G₁`, reusable across many blocks on the same `P₁`.
pub struct FarkasSource<'a> {
    polytope: &'a Polytope,
    columns: Vec<Vec<(usize, f64)>>,
}

impl<'a> FarkasSource<'a> {
    pub fn new(polytope: &'a Polytope) -> Self {
        Self {
            polytope,
            columns: polytope.column_nonzeros(),
        }
    }

    pub fn polytope(&self) -> &Polytope {
        self.polytope
    }

    /// See [`add_farkas_block`].
    pub fn add_block(
        &self,
        model: &mut LpModel,
        g2: &[Vec<LinExpr>],
        h2: &[LinExpr],
    ) -> Result<FarkasBlock> {
        let p1 = self.polytope;
        let (l1, d) = (p1.faces(), p1.dim());
        if g2.len() != h2.len() || g2.iter().any(|row| row.len() != d) {
            return Err(Error::dim(format!(
                "Farkas target must be L2×{d} with L2 right-hand sides"
            )));
        }
        let mut z = Vec::with_capacity(g2.len());
        for (g2_row, h2_r) in g2.iter().zip(h2) {
            let zr = model.add_vars(l1, 0.0, f64::INFINITY);
            for (c, target) in g2_row.iter().enumerate() {
                let mut lhs = LinExpr::zero();
                for &(l, g) in &self.columns[c] {
                    lhs.add_term(zr[l], g);
                }
                model.add_constraint(lhs, Cmp::Eq, target.clone());
            }
            let mut lhs = LinExpr::zero();
            for (l, &h) in p1.h().iter().enumerate() {
                lhs.add_term(zr[l], h);
            }
            model.add_constraint(lhs, Cmp::Le, h2_r.clone());
            z.push(zr);
        }
        Ok(FarkasBlock { z })
    }
}

/// Adds `Z ≥ 0`, `Z·G₁ = G₂`, `Z·h₁ ≤ h₂` to `model`, where `G₂` and `h₂` are
/// affine in the model's variables.
///
/// Feasibility of the block certifies `{x | G₁x ≤ h₁} ⊆ {x | G₂x ≤ h₂}` for
/// the realized `G₂, h₂`; for nonempty `P₁` the converse holds as well.
pub fn add_farkas_block(
    model: &mut LpModel,
    p1: &Polytope,
    g2: &[Vec<LinExpr>],
    h2: &[LinExpr],
) -> Result<FarkasBlock> {
    FarkasSource::new(p1).add_block(model, g2, h2)
}

/// Decides `P₁ ⊆ P₂` through one Farkas feasibility LP per row of `P₂`.
pub fn check_containment_farkas(p1: &Polytope, p2: &Polytope) -> Result<bool> {
    if p1.dim() != p2.dim() {
        return Err(Error::dim("polytopes live in different dimensions"));
    }
    let source = FarkasSource::new(p1);
    for r in 0..p2.faces() {
        let mut model = LpModel::new();
        let g2 = vec![p2.g.row(r).iter().map(|&v| LinExpr::constant(v)).collect()];
        let h2 = vec![LinExpr::constant(p2.h[r])];
        source.add_block(&mut model, &g2, &h2)?;
        match solve(&model).status {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return Ok(false),
            status => {
                return Err(Error::Solver(format!(
                    "Farkas row {r} ended with status {status:?}"
                )))
            }
        }
    }
    Ok(true)
}

/// Outcome of a support-function evaluation.
#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    Bounded { value: f64, argmax: Vec<f64> },
    Unbounded,
}

impl Support {
    pub fn value(&self) -> f64 {
        match self {
            Support::Bounded { value, .. } => *value,
            Support::Unbounded => f64::INFINITY,
        }
    }
}

/// `max cᵀx` subject to `G x ≤ h`.
pub fn max_linear_over_polytope(c: &[f64], p: &Polytope) -> Result<Support> {
    max_linear_over_rows(c, p, None)
}

/// Like [`max_linear_over_polytope`] but restricted to the rows in `rows`.
pub(crate) fn max_linear_over_rows(
    c: &[f64],
    p: &Polytope,
    rows: Option<&[usize]>,
) -> Result<Support> {
    if c.len() != p.dim() {
        return Err(Error::dim(format!(
            "direction has {} entries, polytope dimension is {}",
            c.len(),
            p.dim()
        )));
    }
    let mut model = LpModel::new();
    let x = model.add_vars(p.dim(), f64::NEG_INFINITY, f64::INFINITY);
    let all: Vec<usize>;
    let rows = match rows {
        Some(r) => r,
        None => {
            all = (0..p.faces()).collect();
            &all
        }
    };
    for &r in rows {
        let mut lhs = LinExpr::zero();
        for (j, &g) in p.g.row(r).iter().enumerate() {
            lhs.add_term(x[j], g);
        }
        model.add_constraint(lhs, Cmp::Le, LinExpr::constant(p.h[r]));
    }
    let mut obj = LinExpr::zero();
    for (j, &cj) in c.iter().enumerate() {
        obj.add_term(x[j], -cj);
    }
    model.minimize(obj);
    let sol = solve(&model);
    match sol.status {
        LpStatus::Optimal => {
            let argmax: Vec<f64> = x.iter().map(|&v| sol.value(v)).collect();
            let value = c.iter().zip(&argmax).map(|(a, b)| a * b).sum();
            Ok(Support::Bounded { value, argmax })
        }
        LpStatus::Unbounded => Ok(Support::Unbounded),
        LpStatus::Infeasible => Err(Error::InfeasiblePolytope),
        LpStatus::NumericalFailure => Err(Error::Solver(
            sol.message.unwrap_or_else(|| "support LP failed".into()),
        )),
    }
}

/// All vertices of a bounded polytope in dimension `d ≤ 6`, by brute force
/// over `d`-subsets of faces.
///
/// Meant as a test oracle: it shares no code with the LP backend.
pub fn enumerate_vertices(p: &Polytope) -> Result<Vec<Vec<f64>>> {
    let d = p.dim();
    if d > MAX_ENUMERATION_DIM {
        return Err(Error::EnumerationGuard {
            what: "dimension",
            value: d,
            limit: MAX_ENUMERATION_DIM,
        });
    }
    if d == 0 {
        return Ok(if p.h.iter().all(|&h| h >= -VERTEX_TOLERANCE) {
            vec![vec![]]
        } else {
            vec![]
        });
    }
    // bounded iff the recession cone {y | G y ≤ 0} is {0}
    let mut cone_rows = p.g.clone().resize_vertically(p.faces() + 2 * d, 0.0);
    for k in 0..d {
        cone_rows[(p.faces() + k, k)] = 1.0;
        cone_rows[(p.faces() + d + k, k)] = -1.0;
    }
    let cone_h = vec![0.0; p.faces()]
        .into_iter()
        .chain(std::iter::repeat(1.0).take(2 * d))
        .collect();
    let cone = Polytope::new(cone_rows, cone_h)?;
    let rays = raw_vertices(&cone)?;
    if rays.iter().any(|y| y.iter().any(|v| v.abs() > VERTEX_TOLERANCE)) {
        return Err(Error::UnboundedPolytope);
    }
    raw_vertices(p)
}

fn raw_vertices(p: &Polytope) -> Result<Vec<Vec<f64>>> {
    let (l, d) = (p.faces(), p.dim());
    if binomial(l, d) > MAX_ENUMERATION_SUBSETS {
        return Err(Error::EnumerationGuard {
            what: "face subsets",
            value: binomial(l, d),
            limit: MAX_ENUMERATION_SUBSETS,
        });
    }
    let mut found: Vec<Vec<f64>> = Vec::new();
    let mut subset: Vec<usize> = (0..d).collect();
    if l < d {
        return Ok(found);
    }
    loop {
        let a = p.g.select_rows(&subset);
        let b = DVector::from_iterator(d, subset.iter().map(|&r| p.h[r]));
        let svd = a.clone().svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if smax > 0.0 && smin > 1e-10 * smax {
            if let Some(x) = a.lu().solve(&b) {
                let x: Vec<f64> = x.iter().copied().collect();
                let scale = 1.0 + x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                if p.contains(&x, VERTEX_TOLERANCE * scale)
                    && !found.iter().any(|y| {
                        y.iter().zip(&x).all(|(a, b)| (a - b).abs() <= VERTEX_TOLERANCE * scale)
                    })
                {
                    found.push(x);
                }
            }
        }
        if !next_combination(&mut subset, l) {
            break;
        }
    }
    Ok(found)
}

fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    for i in (0..k).rev() {
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > usize::MAX as u128 {
            return usize::MAX;
        }
    }
    acc as usize
}

/// `P₁ ⊆ P₂` iff every vertex of the bounded `P₁` satisfies `P₂`.
pub fn check_containment_bruteforce(p1: &Polytope, p2: &Polytope) -> Result<bool> {
    if p1.dim() != p2.dim() {
        return Err(Error::dim("polytopes live in different dimensions"));
    }
    Ok(enumerate_vertices(p1)?
        .iter()
        .all(|x| p2.contains(x, VERTEX_TOLERANCE)))
}
