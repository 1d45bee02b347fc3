//! Affinely adjustable robust counterpart: the bound matrix `M(A, B)` is
//! restricted to an affine function of the plant, which removes the `2ⁿ`
//! sign enumeration at the price of some conservatism.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::linalg::{matrix_from_rows, matrix_to_rows, plant_vector, unvec_col};
use crate::lp::{FarkasBlock, FarkasSource, LinExpr, LpModel, Polytope, VarId};
use crate::nominal::{DEFAULT_ETA, MAX_SIGN_ENUMERATION};
use crate::program::{run_program, CertVars, StabilityMode, SynthesisOutcome};
use crate::quantizer::QuantizerSpec;
use crate::synth_sign::{ensure_nonempty, state_dim, ConstraintCounts, SynthesisOptions};
use crate::sysmodel::StabCertificate;

/// `vec M(A, B) = m0 + ma·vec(A) + mb·vec(B)`.
///
/// Column `i + n·j` of `ma` is `vec(M^A_ij)`; column `i + n·k` of `mb` is
/// `vec(M^B_ik)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffineMParam {
    pub m0: DVector<f64>,
    pub ma: DMatrix<f64>,
    pub mb: DMatrix<f64>,
}

impl AffineMParam {
    pub fn zeros(n: usize, m: usize) -> Self {
        Self {
            m0: DVector::zeros(n * n),
            ma: DMatrix::zeros(n * n, n * n),
            mb: DMatrix::zeros(n * n, n * m),
        }
    }

    /// `n`, from the length of `m0`.
    pub fn n(&self) -> usize {
        (self.m0.len() as f64).sqrt().round() as usize
    }

    fn check(&self, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<usize> {
        let n = self.n();
        let nn = n * n;
        if self.m0.len() != nn
            || self.ma.shape() != (nn, nn)
            || a.shape() != (n, n)
            || b.nrows() != n
            || self.mb.shape() != (nn, n * b.ncols())
        {
            return Err(Error::dim("affine M parameters do not fit the plant"));
        }
        Ok(n)
    }
}

impl Serialize for AffineMParam {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr<'a> {
            m0: &'a [f64],
            ma: Vec<Vec<f64>>,
            mb: Vec<Vec<f64>>,
        }
        Repr {
            m0: self.m0.as_slice(),
            ma: matrix_to_rows(&self.ma),
            mb: matrix_to_rows(&self.mb),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for AffineMParam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            m0: Vec<f64>,
            ma: Vec<Vec<f64>>,
            mb: Vec<Vec<f64>>,
        }
        let r = Repr::deserialize(deserializer)?;
        let nn = r.m0.len();
        let ma = matrix_from_rows(&r.ma, nn).map_err(serde::de::Error::custom)?;
        let mb = matrix_from_rows(&r.mb, 0).map_err(serde::de::Error::custom)?;
        Ok(AffineMParam {
            m0: DVector::from_vec(r.m0),
            ma,
            mb,
        })
    }
}

/// `M⁰ + Σ_ij M^A_ij·A_ij + Σ_ik M^B_ik·B_ik`, summed term by term.
pub fn eval_affine_m(param: &AffineMParam, a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = param.check(a, b)?;
    let mut out = unvec_col(param.m0.as_slice(), n, n)?;
    for j in 0..n {
        for i in 0..n {
            let coeff = unvec_col(param.ma.column(i + n * j).as_slice(), n, n)?;
            out += coeff * a[(i, j)];
        }
    }
    for k in 0..b.ncols() {
        for i in 0..n {
            let coeff = unvec_col(param.mb.column(i + n * k).as_slice(), n, n)?;
            out += coeff * b[(i, k)];
        }
    }
    Ok(out)
}

/// `unvec(m0 + [ma, mb]·[vec(A); vec(B)])`.
pub fn eval_affine_m_vectorized(
    param: &AffineMParam,
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
) -> Result<DMatrix<f64>> {
    let n = param.check(a, b)?;
    let z = plant_vector(a, b);
    let (za, zb) = z.split_at(n * n);
    let v = &param.m0 + &param.ma * DVector::from_column_slice(za) + &param.mb * DVector::from_column_slice(zb);
    unvec_col(v.as_slice(), n, n)
}

#[derive(Debug, Clone)]
pub struct AarcCertificate {
    pub cert: StabCertificate,
    pub param: AffineMParam,
}

struct ParamVars {
    m0: Vec<VarId>,
    /// `[ma, mb]` row-major, `n² × n(n+m)`.
    mab: Vec<Vec<VarId>>,
}

struct Assembled {
    param: ParamVars,
    row_sum: FarkasBlock,
    envelopes: Vec<FarkasBlock>,
}

fn assemble(
    model: &mut LpModel,
    source: &FarkasSource<'_>,
    vars: &CertVars,
    vertices: &[Vec<f64>],
) -> Result<Assembled> {
    let n = vars.n();
    let m = vars.s.len();
    let nn = n * n;
    let d = n * (n + m);
    let param = ParamVars {
        m0: (0..nn).map(|_| model.add_free_var()).collect(),
        mab: (0..nn)
            .map(|_| (0..d).map(|_| model.add_free_var()).collect())
            .collect(),
    };

    // row sums: (1ᵀ⊗I_n)[ma, mb] and v − η − (1ᵀ⊗I_n)m0
    let mut g_m = Vec::with_capacity(n);
    let mut h_m = Vec::with_capacity(n);
    for i in 0..n {
        let g_row: Vec<LinExpr> = (0..d)
            .map(|c| LinExpr::sum((0..n).map(|j| param.mab[i + n * j][c])))
            .collect();
        g_m.push(g_row);
        h_m.push(vars.row_bound(i) - LinExpr::sum((0..n).map(|j| param.m0[i + n * j])));
    }
    let row_sum = source.add_block(model, &g_m, &h_m)?;

    let h_beta: Vec<LinExpr> = [-1.0, 1.0]
        .iter()
        .flat_map(|_| param.m0.iter().map(|&v| LinExpr::var(v)))
        .collect();
    let mut envelopes = Vec::with_capacity(vertices.len());
    for beta in vertices {
        let mut g_beta = Vec::with_capacity(2 * nn);
        for sign in [-1.0, 1.0] {
            for p in 0..nn {
                let (i, j) = (p % n, p / n);
                let mut row: Vec<LinExpr> = param.mab[p].iter().map(|&v| LinExpr::term(v, -1.0)).collect();
                // (Yᵀ⊗I_n) is diagonal with v_j at position i + n·j
                row[p].add_scaled(&vars.v[j], sign);
                // ((diag(β)S)ᵀ⊗I_n) maps B_ik to β_k S_kj
                for k in 0..m {
                    row[nn + i + n * k].add_scaled(&vars.s[k][j], sign * beta[k]);
                }
                g_beta.push(row);
            }
        }
        envelopes.push(source.add_block(model, &g_beta, &h_beta)?);
    }
    Ok(Assembled {
        param,
        row_sum,
        envelopes,
    })
}

/// The AARC program over the consistency polytope.
pub fn synthesize_aarc(
    polytope: &Polytope,
    options: &SynthesisOptions,
) -> Result<SynthesisOutcome<AarcCertificate>> {
    let prog = options.program(polytope)?;
    check_vertex_guard(prog.m)?;
    ensure_nonempty(polytope)?;
    let source = FarkasSource::new(polytope);
    let vertices = options.spec.vertices();
    let out = run_program(&prog, |model, vars| assemble(model, &source, vars, &vertices))?;
    let (n, m) = (prog.n, prog.m);
    Ok(out.map(|solved| {
        let sol = &solved.solution;
        let p = &solved.handles.param;
        let nn = n * n;
        let param = AffineMParam {
            m0: DVector::from_iterator(nn, p.m0.iter().map(|&v| sol.value(v))),
            ma: DMatrix::from_fn(nn, nn, |r, c| sol.value(p.mab[r][c])),
            mb: DMatrix::from_fn(nn, n * m, |r, c| sol.value(p.mab[r][nn + c])),
        };
        AarcCertificate {
            cert: solved.cert,
            param,
        }
    }))
}

fn check_vertex_guard(m: usize) -> Result<()> {
    if m > MAX_SIGN_ENUMERATION {
        return Err(Error::EnumerationGuard {
            what: "m",
            value: m,
            limit: MAX_SIGN_ENUMERATION,
        });
    }
    Ok(())
}

/// Table counts for the AARC program with `L` data faces.
pub fn count_constraints_aarc(n: usize, m: usize, l: usize) -> ConstraintCounts {
    let vertices = 1usize << m;
    let rows = n + 2 * n * n * vertices;
    ConstraintCounts {
        robust_inequalities: rows,
        farkas_variables: rows * l,
        equalities: rows * n * (n + m),
    }
}

/// Counts read off the feasibility model actually assembled for `polytope`.
pub fn assembled_counts_aarc(polytope: &Polytope, spec: &QuantizerSpec) -> Result<ConstraintCounts> {
    let m = spec.channels();
    let n = state_dim(polytope.dim(), m)?;
    check_vertex_guard(m)?;
    let mut model = LpModel::new();
    let vars = CertVars::declare(&mut model, n, m, StabilityMode::Ss, DEFAULT_ETA);
    let source = FarkasSource::new(polytope);
    let asm = assemble(&mut model, &source, &vars, &spec.vertices())?;
    let blocks = std::iter::once(&asm.row_sum).chain(&asm.envelopes);
    let farkas_variables = blocks.map(|b| b.z.iter().map(Vec::len).sum::<usize>()).sum();
    Ok(ConstraintCounts {
        robust_inequalities: model.num_inequalities(),
        farkas_variables,
        equalities: model.num_equalities(),
    })
}
