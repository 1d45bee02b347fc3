mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use qddc::consistency::{build_polytope, contains_plant};
use qddc::linalg::{sign_vectors, split_plant_vector};
use qddc::lp::{
    add_farkas_block, enumerate_vertices, max_linear_over_polytope, solve, Cmp, LinExpr, LpModel, LpStatus,
    Polytope, Support,
};
use qddc::nominal::{synthesize_nominal_mform, synthesize_nominal_sign, NominalProblem};
use qddc::synth_aarc::{
    assembled_counts_aarc, count_constraints_aarc, eval_affine_m, eval_affine_m_vectorized, synthesize_aarc,
};
use qddc::synth_sign::{
    assembled_counts_sign, build_sign_polytope_rows, count_constraints_sign, synthesize_sign, SynthesisOptions,
};
use qddc::verify::robust_verify;
use qddc::{LinearSystem, Objective, QuantizerSpec, StabilityMode};

/// A mildly unstable 2-state plant that is easy to stabilize from data.
fn plant(seed: u64) -> LinearSystem {
    let mut rng = common::rng(seed);
    let a = common::random_matrix(&mut rng, 2, 2, 0.8);
    let b = DMatrix::from_row_slice(2, 1, &[1.0, 0.6]) + common::random_matrix(&mut rng, 2, 1, 0.2);
    LinearSystem::new(a, b).unwrap()
}

fn data(seed: u64, t: usize, radius: f64) -> (LinearSystem, Polytope) {
    let sys = plant(seed);
    let mut rng = common::rng(seed ^ 0x5eed);
    let ds = common::blurred_dataset(&sys, &mut rng, t, radius);
    let p = build_polytope(&ds).unwrap();
    (sys, p)
}

fn options(rho: f64, mode: StabilityMode) -> SynthesisOptions {
    SynthesisOptions::new(QuantizerSpec::uniform(1, rho).unwrap(), mode)
}

/// Points of the polytope reached by maximizing random directions.
fn sample_points(p: &Polytope, seed: u64, count: usize) -> Vec<Vec<f64>> {
    let mut rng = common::rng(seed);
    (0..count)
        .filter_map(|_| {
            let c = common::random_matrix(&mut rng, p.dim(), 1, 1.0);
            match max_linear_over_polytope(c.as_slice(), p).unwrap() {
                Support::Bounded { argmax, .. } => Some(argmax),
                Support::Unbounded => None,
            }
        })
        .collect()
}

/// Builds the sign-form containment program for a fixed `(v, S)`.
fn farkas_accepts(p: &Polytope, v: &DVector<f64>, s: &DMatrix<f64>, spec: &QuantizerSpec, eta: f64) -> bool {
    let n = v.len();
    let ve: Vec<LinExpr> = v.iter().map(|&x| LinExpr::constant(x)).collect();
    let se: Vec<Vec<LinExpr>> = (0..s.nrows())
        .map(|k| (0..n).map(|j| LinExpr::constant(s[(k, j)])).collect())
        .collect();
    let mut model = LpModel::new();
    for alpha in sign_vectors(n) {
        for beta in spec.vertices() {
            let (g, h) = build_sign_polytope_rows(&ve, &se, &alpha, &beta, eta).unwrap();
            add_farkas_block(&mut model, p, &g, &h).unwrap();
        }
    }
    match solve(&model).status {
        LpStatus::Optimal => true,
        LpStatus::Infeasible => false,
        other => panic!("unexpected status {other:?}"),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sign_certificates_pass_the_independent_audit(seed in any::<u64>(), rho in 0.5..1.0f64, ess in any::<bool>()) {
        let (sys, p) = data(seed, 10, 0.1);
        let mode = if ess { StabilityMode::Ess } else { StabilityMode::Ss };
        let opts = options(rho, mode);
        if let Some(out) = synthesize_sign(&p, &opts).unwrap().certified() {
            let report = robust_verify(&p, &out.cert.v, &out.cert.s, &opts.spec, opts.eta).unwrap();
            prop_assert!(report.verified, "worst margin {}", report.worst_margin);
            prop_assert!(contains_plant(&p, sys.a(), sys.b()).unwrap());
        }
    }

    /// With `n = 1` the robust program is exact, so it must match a direct
    /// minimax over the polytope vertices.
    #[test]
    fn scalar_sign_program_matches_vertex_minimax(seed in any::<u64>(), rho in 0.3..1.0f64) {
        let mut rng = common::rng(seed);
        let sys = common::random_system(&mut rng, 1, 1);
        let ds = common::blurred_dataset(&sys, &mut rng, 4, 0.15);
        let p = build_polytope(&ds).unwrap();
        let spec = QuantizerSpec::uniform(1, rho).unwrap();
        let opts = SynthesisOptions::new(spec.clone(), StabilityMode::Ss).with_objective(Objective::MinimizeLambda);

        let mut model = LpModel::new();
        let s = model.add_free_var();
        let t = model.add_var(0.0, f64::INFINITY);
        for z in enumerate_vertices(&p).unwrap() {
            for beta in spec.vertices() {
                let e = LinExpr::constant(z[0]) + LinExpr::term(s, z[1] * beta[0]);
                model.add_constraint(e.clone(), Cmp::Le, LinExpr::var(t));
                model.add_constraint(-e, Cmp::Le, LinExpr::var(t));
            }
        }
        model.minimize(LinExpr::var(t));
        let direct = solve(&model);
        prop_assert_eq!(direct.status, LpStatus::Optimal);
        let best = direct.value(t);

        let out = synthesize_sign(&p, &opts).unwrap();
        if best <= 1.0 - opts.eta - 1e-6 {
            let cert = out.certified();
            prop_assert!(cert.is_some());
            prop_assert!((cert.unwrap().cert.lambda - best).abs() <= 1e-6);
        } else if best > 1.0 - opts.eta + 1e-6 {
            prop_assert!(!out.is_certified());
        }
    }

    #[test]
    fn more_data_never_hurts(seed in any::<u64>(), rho in 0.4..1.0f64) {
        let sys = plant(seed);
        let mut rng = common::rng(seed);
        let ds = common::blurred_dataset(&sys, &mut rng, 12, 0.15);
        let opts = options(rho, StabilityMode::Ss).with_objective(Objective::MinimizeLambda);
        let few = synthesize_sign(&build_polytope(&ds.prefix(6)).unwrap(), &opts).unwrap();
        let many = synthesize_sign(&build_polytope(&ds).unwrap(), &opts).unwrap();
        if let Some(few) = few.certified() {
            let many = many.certified();
            prop_assert!(many.is_some());
            prop_assert!(many.unwrap().cert.lambda <= few.cert.lambda + 1e-6);
        }
    }

    #[test]
    fn aarc_is_at_least_as_conservative(seed in any::<u64>(), rho in 0.4..1.0f64) {
        let (_, p) = data(seed, 10, 0.1);
        let opts = options(rho, StabilityMode::Ss).with_objective(Objective::MinimizeLambda);
        if let Some(aarc) = synthesize_aarc(&p, &opts).unwrap().certified() {
            let sign = synthesize_sign(&p, &opts).unwrap().certified();
            prop_assert!(sign.is_some());
            prop_assert!(sign.unwrap().cert.lambda <= aarc.cert.lambda + 1e-6);
        }
    }

    /// Re-derives every AARC inequality at sampled plants from the returned
    /// affine map, without touching the multipliers.
    #[test]
    fn aarc_certificates_hold_pointwise(seed in any::<u64>(), rho in 0.5..1.0f64, ess in any::<bool>()) {
        let (_, p) = data(seed, 10, 0.1);
        let mode = if ess { StabilityMode::Ess } else { StabilityMode::Ss };
        let opts = options(rho, mode);
        if let Some(out) = synthesize_aarc(&p, &opts).unwrap().certified() {
            let (v, s) = (&out.cert.v, &out.cert.s);
            let tol = 1e-6 * v.amax().max(1.0);
            for z in sample_points(&p, seed, 12) {
                let (a, b) = split_plant_vector(&z, 2, 1).unwrap();
                let m = eval_affine_m(&out.param, &a, &b).unwrap();
                let mv = eval_affine_m_vectorized(&out.param, &a, &b).unwrap();
                prop_assert!((&m - &mv).amax() <= 1e-9 * (1.0 + m.amax()));
                for i in 0..2 {
                    prop_assert!(m.row(i).sum() <= v[i] - opts.eta + tol);
                }
                for beta in opts.spec.vertices() {
                    let x = &a * DMatrix::from_diagonal(v) + &b * (s * beta[0]);
                    prop_assert!((x.abs() - &m).max() <= tol);
                }
            }
            let report = robust_verify(&p, v, s, &opts.spec, opts.eta).unwrap();
            prop_assert!(report.verified);
        }
    }

    /// The support-function audit and a Farkas program over the same fixed
    /// `(v, S)` reach the same verdict away from the boundary.
    #[test]
    fn audit_agrees_with_fixed_certificate_farkas(seed in any::<u64>(), jitter in 0.0..0.4f64) {
        let (_, p) = data(seed, 8, 0.1);
        let opts = options(0.8, StabilityMode::Ess);
        let Some(out) = synthesize_sign(&p, &opts).unwrap().certified() else {
            return Ok(());
        };
        let mut rng = common::rng(seed.wrapping_add(7));
        let s = &out.cert.s + common::random_matrix(&mut rng, 1, 2, jitter) * out.cert.v.amax();
        let report = robust_verify(&p, &out.cert.v, &s, &opts.spec, opts.eta).unwrap();
        prop_assume!(report.worst_margin.abs() > 1e-5);
        prop_assert_eq!(farkas_accepts(&p, &out.cert.v, &s, &opts.spec, opts.eta), report.verified);
    }

    #[test]
    fn singleton_data_matches_the_known_plant(seed in any::<u64>(), rho in 0.4..1.0f64) {
        let sys = plant(seed);
        let p = common::singleton_polytope(&sys);
        let spec = QuantizerSpec::uniform(1, rho).unwrap();
        let opts = SynthesisOptions::new(spec.clone(), StabilityMode::Ss).with_objective(Objective::MinimizeLambda);
        let nominal = NominalProblem::new(sys, spec, StabilityMode::Ss).with_objective(Objective::MinimizeLambda);

        let by_data = synthesize_sign(&p, &opts).unwrap().certified().map(|c| c.cert.lambda);
        let by_model = synthesize_nominal_sign(&nominal).unwrap().certified().map(|c| c.lambda);
        prop_assert_eq!(by_data.is_some(), by_model.is_some());
        if let (Some(a), Some(b)) = (by_data, by_model) {
            prop_assert!((a - b).abs() <= 1e-6);
        }

        let by_data = synthesize_aarc(&p, &opts).unwrap().certified().map(|c| c.cert.lambda);
        let by_model = synthesize_nominal_mform(&nominal).unwrap().certified().map(|c| c.lambda);
        prop_assert_eq!(by_data.is_some(), by_model.is_some());
        if let (Some(a), Some(b)) = (by_data, by_model) {
            prop_assert!((a - b).abs() <= 1e-6);
        }
    }
}

#[test]
fn assembled_counts_follow_the_formulas() {
    let mut rng = common::rng(11);
    for n in 1..=3 {
        for m in 1..=2 {
            let sys = common::random_system(&mut rng, n, m);
            let ds = common::blurred_dataset(&sys, &mut rng, 3, 0.2);
            let p = build_polytope(&ds).unwrap();
            let spec = QuantizerSpec::uniform(m, 0.5).unwrap();
            let l = p.faces();
            assert_eq!(assembled_counts_sign(&p, &spec).unwrap(), count_constraints_sign(n, m, l));
            assert_eq!(assembled_counts_aarc(&p, &spec).unwrap(), count_constraints_aarc(n, m, l));
        }
    }
}
