//! Acceptance gate. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use validation as common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use qddc::consistency::{build_polytope, contains_plant, generate_dataset, prune_redundant, Dataset, Excitation};
use qddc::experiments::{min_rho, partition_coarse, partition_fine, sys1, sys2, ExperimentConfig, Instance, Method};
use qddc::lp::{add_farkas_block, check_containment_bruteforce, check_containment_farkas, solve, LinExpr, LpModel, LpStatus, Polytope};
use qddc::nominal::{synthesize_nominal_mform, synthesize_nominal_sign, NominalProblem};
use qddc::quantizer::{delta_from_rho, log_quantize};
use qddc::synth_aarc::{assembled_counts_aarc, synthesize_aarc};
use qddc::synth_sign::{assembled_counts_sign, synthesize_sign, SynthesisOptions};
use qddc::sysmodel::{check_cert, closed_loop_vertex_gain, decay_check, simulate_quantized};
use qddc::verify::robust_verify;
use qddc::{Objective, QuantizerSpec, StabCertificate, StabilityMode};

const RHO_BISECTION_TOL: f64 = 1e-4;
const TARGET_RHO_TOL: f64 = 5e-4;
const EIGEN_TOL: f64 = 1e-3;
const EQUIVALENCE_TOL: f64 = 1e-6;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    title: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn close(x: f64, target: f64, tol: f64) -> bool {
    (x - target).abs() <= tol
}

fn fmt_rho(r: Option<f64>) -> String {
    r.map_or("none".into(), |r| format!("{r:.4}"))
}

fn quantizer_sector_bound() -> Outcome {
    let mut rng = common::rng(0xC1);
    let mut worst = f64::NEG_INFINITY;
    for rho in [0.1, 0.3, 0.4, 0.5, 0.7, 0.9] {
        let delta = delta_from_rho(rho).map_err(|e| e.to_string())?;
        for _ in 0..100_000 {
            let z: f64 = rng.random_range(-1e6..=1e6);
            let g = log_quantize(z, rho).map_err(|e| e.to_string())?;
            let excess = (z - g).abs() - delta * z.abs();
            worst = worst.max(excess);
            if excess > 1e-12 {
                return Err(format!("rho = {rho}, z = {z}: |z - g(z)| exceeds delta|z| by {excess:e}"));
            }
        }
    }
    let d = delta_from_rho(0.4).map_err(|e| e.to_string())?;
    if format!("{d:.4}") != "0.4286" {
        return Err(format!("delta(0.4) = {d}"));
    }
    Ok(format!("6e5 samples, worst excess {worst:.3e}; delta(0.4) = {d:.4}"))
}

fn nominal_sys1_min_rho() -> Outcome {
    let sys = sys1();
    let singleton = common::singleton_polytope(&sys);
    let mut lines = Vec::new();
    let mut ok = true;
    for (mode, target) in [(StabilityMode::Ss, 0.3182), (StabilityMode::Ess, 0.1422)] {
        let nominal = min_rho(Instance::Plant(&sys), &ExperimentConfig::new(Method::Nominal, mode), RHO_BISECTION_TOL)
            .map_err(|e| e.to_string())?;
        let aarc = min_rho(
            Instance::Data { polytope: &singleton, m: sys.m() },
            &ExperimentConfig::new(Method::Aarc, mode),
            RHO_BISECTION_TOL,
        )
        .map_err(|e| e.to_string())?;
        for (name, got) in [("nominal", nominal), ("aarc-singleton", aarc)] {
            let hit = got.is_some_and(|r| close(r, target, TARGET_RHO_TOL));
            ok &= hit;
            lines.push(format!("{mode} {name} {} (target {target})", fmt_rho(got)));
        }
    }
    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn nominal_sys2_and_spectra() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;

    let s2 = sys2();
    let got = min_rho(Instance::Plant(&s2), &ExperimentConfig::new(Method::Nominal, StabilityMode::Ess), RHO_BISECTION_TOL)
        .map_err(|e| e.to_string())?;
    let hit = got.is_some_and(|r| close(r, 0.2245, TARGET_RHO_TOL));
    ok &= hit;
    lines.push(format!("sys2 ESS min rho {} (target 0.2245)", fmt_rho(got)));

    let eig = s2.a().clone().symmetric_eigen().eigenvalues;
    let radius = eig.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    ok &= close(radius, 1.0633, EIGEN_TOL);
    lines.push(format!("sys2 spectral radius {radius:.4}"));

    let Some(eig1) = sys1().a().clone().eigenvalues() else {
        return Err("sys1 has complex eigenvalues".into());
    };
    let mut eig1: Vec<f64> = eig1.iter().copied().collect();
    eig1.sort_by(f64::total_cmp);
    let expected = [-1.0185, -0.2613, 0.1236];
    ok &= eig1.iter().zip(expected).all(|(a, b)| close(*a, b, EIGEN_TOL));
    lines.push(format!("sys1 eigenvalues {:.4?}", eig1));

    let detail = lines.join("; ");
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn equivalence_and_counts() -> Outcome {
    let mut rng = common::rng(0xC4);
    let mut feas_mismatch = 0;
    let mut lambda_mismatch = 0;
    let mut worst_gap = 0.0f64;
    let mut feasible = 0;
    for _ in 0..50 {
        let n = rng.random_range(1..=3);
        let m = rng.random_range(1..=2);
        let rho: f64 = rng.random_range(0.2..=1.0);
        let sys = common::random_system(&mut rng, n, m);
        let spec = QuantizerSpec::uniform(m, rho).map_err(|e| e.to_string())?;

        let ss = NominalProblem::new(sys.clone(), spec.clone(), StabilityMode::Ss)
            .with_objective(Objective::MinimizeLambda);
        let a = synthesize_nominal_mform(&ss).map_err(|e| e.to_string())?;
        let b = synthesize_nominal_sign(&ss).map_err(|e| e.to_string())?;
        match (a.certified(), b.certified()) {
            (Some(a), Some(b)) => {
                feasible += 1;
                let gap = (a.lambda - b.lambda).abs();
                worst_gap = worst_gap.max(gap);
                if gap > EQUIVALENCE_TOL {
                    lambda_mismatch += 1;
                }
            }
            (None, None) => {}
            _ => feas_mismatch += 1,
        }

        let ess = NominalProblem::new(sys, spec, StabilityMode::Ess);
        let a = synthesize_nominal_mform(&ess).map_err(|e| e.to_string())?.is_certified();
        let b = synthesize_nominal_sign(&ess).map_err(|e| e.to_string())?.is_certified();
        if a != b {
            feas_mismatch += 1;
        }
    }

    let mut count_errors = Vec::new();
    for n in 1..=4usize {
        for m in 1..=3usize {
            let d = n * (n + m);
            let p = Polytope::from_box(&vec![-1.0; d], &vec![1.0; d]).map_err(|e| e.to_string())?;
            let spec = QuantizerSpec::uniform(m, 0.5).map_err(|e| e.to_string())?;
            let sign = assembled_counts_sign(&p, &spec).map_err(|e| e.to_string())?;
            let aarc = assembled_counts_aarc(&p, &spec).map_err(|e| e.to_string())?;
            if sign.robust_inequalities != n << (n + m) {
                count_errors.push(format!("sign n={n} m={m}: {}", sign.robust_inequalities));
            }
            if aarc.robust_inequalities != n + n * n * (1 << (m + 1)) {
                count_errors.push(format!("aarc n={n} m={m}: {}", aarc.robust_inequalities));
            }
        }
    }

    let detail = format!(
        "50 systems ({feasible} SS-feasible): {feas_mismatch} feasibility mismatches, \
         {lambda_mismatch} min-lambda gaps > 1e-6 (worst {worst_gap:.3e}); \
         count mismatches: {}",
        if count_errors.is_empty() { "none".to_string() } else { count_errors.join(", ") }
    );
    if feas_mismatch == 0 && lambda_mismatch == 0 && count_errors.is_empty() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn random_bounded_polytope(rng: &mut rand_chacha::ChaCha8Rng, d: usize, radius: f64) -> Result<Polytope, String> {
    let extra = rng.random_range(0..=3usize);
    let rows = 2 * d + extra;
    let mut g = DMatrix::zeros(rows, d);
    let mut h = Vec::with_capacity(rows);
    for i in 0..d {
        g[(2 * i, i)] = 1.0;
        g[(2 * i + 1, i)] = -1.0;
        h.push(radius * rng.random_range(0.5..=1.5));
        h.push(radius * rng.random_range(0.5..=1.5));
    }
    for r in 2 * d..rows {
        for c in 0..d {
            g[(r, c)] = rng.random_range(-1.0..=1.0);
        }
        h.push(rng.random_range(0.1..=1.5) * radius);
    }
    Polytope::new(g, h).map_err(|e| e.to_string())
}

fn farkas_oracle() -> Outcome {
    let mut rng = common::rng(0xC5);
    let mut contained = 0;
    for case in 0..100 {
        let d = rng.random_range(1..=3);
        let p1 = random_bounded_polytope(&mut rng, d, 1.0)?;
        let r2 = rng.random_range(0.8..=2.0);
        let p2 = random_bounded_polytope(&mut rng, d, r2)?;

        let mut model = LpModel::new();
        let g2: Vec<Vec<LinExpr>> = (0..p2.faces())
            .map(|r| p2.g().row(r).iter().map(|&x| LinExpr::constant(x)).collect())
            .collect();
        let h2: Vec<LinExpr> = p2.h().iter().map(|&x| LinExpr::constant(x)).collect();
        add_farkas_block(&mut model, &p1, &g2, &h2).map_err(|e| e.to_string())?;
        let farkas = match solve(&model).status {
            LpStatus::Optimal => true,
            LpStatus::Infeasible => false,
            s => return Err(format!("case {case}: Farkas program ended {s:?}")),
        };
        let brute = check_containment_bruteforce(&p1, &p2).map_err(|e| e.to_string())?;
        if farkas != brute {
            return Err(format!("case {case} (d = {d}): Farkas says {farkas}, vertices say {brute}"));
        }
        contained += usize::from(brute);
    }
    Ok(format!("100 pairs agree ({contained} contained, {} not)", 100 - contained))
}

fn truth_checks(
    cert: &StabCertificate,
    p: &Polytope,
    spec: &QuantizerSpec,
    rng: &mut rand_chacha::ChaCha8Rng,
) -> Result<(), String> {
    let truth = sys1();
    let report = robust_verify(p, &cert.v, &cert.s, spec, cert.eta).map_err(|e| e.to_string())?;
    if !report.verified {
        return Err(format!("robust_verify rejected, worst margin {:e}", report.worst_margin));
    }
    if !contains_plant(p, truth.a(), truth.b()).map_err(|e| e.to_string())? {
        return Err("truth plant outside the polytope".into());
    }
    let gain = closed_loop_vertex_gain(&truth, &cert.k, &cert.v, spec).map_err(|e| e.to_string())?;
    if gain > cert.lambda + 1e-9 {
        return Err(format!("truth vertex gain {gain} > lambda {}", cert.lambda));
    }
    for _ in 0..3 {
        let x0 = DVector::from_fn(3, |_, _| rng.random_range(-5.0..=5.0));
        let traj = simulate_quantized(&truth, &cert.k, spec, &x0, 200).map_err(|e| e.to_string())?;
        if traj.diverged || !decay_check(&traj, &cert.v, cert.lambda) {
            return Err(format!("decay check failed from x0 = {:?}", x0.as_slice()));
        }
    }
    Ok(())
}

fn end_to_end_soundness() -> Outcome {
    let sys = sys1();
    let mut rng = common::rng(0xC6);
    let mut emitted = [0usize; 2];
    let mut tried = 0usize;
    for seed in 1..=20u64 {
        let full = generate_dataset(&sys, &partition_coarse(), 100, seed, &Excitation::default())
            .map_err(|e| e.to_string())?;
        for t in [60, 80, 100] {
            let p = build_polytope(&full.prefix(t)).map_err(|e| e.to_string())?;
            // synthesis runs on the irredundant description; audits use `p`
            let q = prune_redundant(&p).map_err(|e| e.to_string())?;
            for rho in [0.7, 0.9] {
                let spec = QuantizerSpec::uniform(2, rho).map_err(|e| e.to_string())?;
                let opts = SynthesisOptions::new(spec.clone(), StabilityMode::Ss).with_objective(Objective::MinimizeLambda);
                tried += 1;
                let ctx = |m: &str, e: String| format!("seed {seed}, T {t}, rho {rho}, {m}: {e}");
                if let Some(c) = synthesize_sign(&q, &opts).map_err(|e| ctx("sign", e.to_string()))?.certified() {
                    truth_checks(&c.cert, &p, &spec, &mut rng).map_err(|e| ctx("sign", e))?;
                    emitted[0] += 1;
                }
                if let Some(c) = synthesize_aarc(&q, &opts).map_err(|e| ctx("aarc", e.to_string()))?.certified() {
                    truth_checks(&c.cert, &p, &spec, &mut rng).map_err(|e| ctx("aarc", e))?;
                    emitted[1] += 1;
                }
            }
        }
    }
    if emitted[0] == 0 || emitted[1] == 0 {
        return Err(format!("no certificates to audit (sign {}, aarc {})", emitted[0], emitted[1]));
    }
    Ok(format!(
        "{} sign and {} AARC certificates out of {tried} instances each passed all four checks",
        emitted[0], emitted[1]
    ))
}

fn conservatism_and_monotonicity() -> Outcome {
    let sys = sys1();
    let nominal = min_rho(Instance::Plant(&sys), &ExperimentConfig::new(Method::Nominal, StabilityMode::Ss), RHO_BISECTION_TOL)
        .map_err(|e| e.to_string())?
        .ok_or("nominal sys1 infeasible")?;
    let mut lines = vec![format!("nominal {nominal:.4}")];
    // infeasible at rho = 1 sorts above every feasible value
    let key = |r: Option<f64>| r.unwrap_or(f64::INFINITY);
    for seed in [1u64, 2, 3] {
        let full = generate_dataset(&sys, &partition_coarse(), 100, seed, &Excitation::default())
            .map_err(|e| e.to_string())?;
        let mut prev: Option<(f64, f64)> = None;
        let mut row = Vec::new();
        for t in [60, 80, 100] {
            let p = build_polytope(&full.prefix(t)).map_err(|e| e.to_string())?;
            let q = prune_redundant(&p).map_err(|e| e.to_string())?;
            let inst = Instance::Data { polytope: &q, m: 2 };
            let sign = min_rho(inst, &ExperimentConfig::new(Method::Sign, StabilityMode::Ss), RHO_BISECTION_TOL)
                .map_err(|e| e.to_string())?;
            let aarc = min_rho(inst, &ExperimentConfig::new(Method::Aarc, StabilityMode::Ss), RHO_BISECTION_TOL)
                .map_err(|e| e.to_string())?;
            row.push(format!("T{t} sign {} aarc {}", fmt_rho(sign), fmt_rho(aarc)));
            if key(aarc) < key(sign) - RHO_BISECTION_TOL || key(sign) < nominal - RHO_BISECTION_TOL {
                return Err(format!("ordering violated at seed {seed}: {}", row.join(", ")));
            }
            if let Some((ps, pa)) = prev {
                if key(sign) > ps + RHO_BISECTION_TOL || key(aarc) > pa + RHO_BISECTION_TOL {
                    return Err(format!("min rho grew with more data at seed {seed}: {}", row.join(", ")));
                }
            }
            prev = Some((key(sign), key(aarc)));

            if t == 100 {
                delta_shrink_checks(&p, &q, seed)?;
            }
        }
        lines.push(format!("seed {seed}: {}", row.join(", ")));
    }
    Ok(lines.join("; "))
}

/// Certificates found at `ρ = 0.7` must stay valid for every smaller sector.
fn delta_shrink_checks(p: &Polytope, pruned: &Polytope, seed: u64) -> Result<(), String> {
    let spec = QuantizerSpec::uniform(2, 0.7).map_err(|e| e.to_string())?;
    let opts = SynthesisOptions::new(spec.clone(), StabilityMode::Ss);
    let mut rng = common::rng(seed ^ 0xC7);
    let smaller: Vec<QuantizerSpec> = (0..4)
        .map(|_| {
            let d: Vec<f64> = spec.delta().iter().map(|&d| rng.random_range(0.0..=d)).collect();
            QuantizerSpec::from_delta(d).map_err(|e| e.to_string())
        })
        .collect::<Result<_, _>>()?;
    let mut certs = Vec::new();
    if let Some(c) = synthesize_sign(pruned, &opts).map_err(|e| e.to_string())?.certified() {
        certs.push(("sign", c.cert));
    }
    if let Some(c) = synthesize_aarc(pruned, &opts).map_err(|e| e.to_string())?.certified() {
        certs.push(("aarc", c.cert));
    }
    for (name, cert) in &certs {
        for s in &smaller {
            let r = robust_verify(p, &cert.v, &cert.s, s, cert.eta).map_err(|e| e.to_string())?;
            if !r.verified {
                return Err(format!("{name} certificate fails at delta {:?}", s.delta()));
            }
        }
    }
    let truth = sys1();
    let problem = NominalProblem::new(truth.clone(), spec, StabilityMode::Ss);
    let cert = synthesize_nominal_mform(&problem)
        .map_err(|e| e.to_string())?
        .certified()
        .ok_or("nominal infeasible at 0.7")?;
    for s in &smaller {
        if !check_cert(&truth, &cert, s).map_err(|e| e.to_string())?.valid {
            return Err(format!("nominal certificate fails at delta {:?}", s.delta()));
        }
    }
    Ok(())
}

fn pruning_correctness() -> Outcome {
    let ds: Dataset = generate_dataset(&sys2(), &partition_fine(), 350, 1, &Excitation::default())
        .map_err(|e| e.to_string())?;
    let p = build_polytope(&ds).map_err(|e| e.to_string())?;
    if p.dim() != 40 || p.faces() > 3500 {
        return Err(format!("unexpected polytope shape {} x {}", p.faces(), p.dim()));
    }
    let pruned = prune_redundant(&p).map_err(|e| e.to_string())?;
    let forward = check_containment_farkas(&p, &pruned).map_err(|e| e.to_string())?;
    let backward = check_containment_farkas(&pruned, &p).map_err(|e| e.to_string())?;
    let detail = format!(
        "{} rows -> {} rows; original in pruned: {forward}, pruned in original: {backward}",
        p.faces(),
        pruned.faces()
    );
    if forward && backward && pruned.faces() < p.faces() {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "quantizer sector bound", limit: Duration::from_secs(1), run: quantizer_sector_bound },
        Criterion { id: 2, title: "nominal sys1 minimal density", limit: Duration::from_secs(60), run: nominal_sys1_min_rho },
        Criterion { id: 3, title: "nominal sys2 and open-loop spectra", limit: Duration::from_secs(60), run: nominal_sys2_and_spectra },
        Criterion { id: 4, title: "form equivalence and constraint counts", limit: Duration::from_secs(120), run: equivalence_and_counts },
        Criterion { id: 5, title: "Farkas vs vertex enumeration", limit: Duration::from_secs(60), run: farkas_oracle },
        Criterion { id: 6, title: "end-to-end soundness", limit: Duration::from_secs(600), run: end_to_end_soundness },
        Criterion { id: 7, title: "conservatism and monotonicity", limit: Duration::from_secs(900), run: conservatism_and_monotonicity },
        Criterion { id: 8, title: "pruning correctness", limit: Duration::from_secs(900), run: pruning_correctness },
    ];
    let filter: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for c in &criteria {
        if !filter.is_empty() && !filter.contains(&c.id) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let (pass, detail) = match outcome {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("{d}; over the {:?} limit", c.limit)),
            Err(d) => (false, d),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {} {}: {} [{:.2}s] {}",
            c.id,
            if pass { "PASS" } else { "FAIL" },
            c.title,
            elapsed.as_secs_f64(),
            detail
        );
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
