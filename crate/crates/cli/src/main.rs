use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qddc::consistency::{build_polytope, generate_dataset, prune_redundant, Dataset, Excitation};
use qddc::experiments::{
    builtin_partition, builtin_system, log_grid, min_rho, sweep, sweep_csv, synthesize, CertificateFile,
    ExperimentConfig, Instance, Method,
};
use qddc::lp::check_containment_farkas;
use qddc::nominal::DEFAULT_ETA;
use qddc::sysmodel::{check_cert, closed_loop_vertex_gain, decay_check, simulate_quantized};
use qddc::verify::robust_verify;
use qddc::{LinearSystem, Objective, Partition, Polytope, StabilityMode};
use serde_json::json;

const EXIT_INFEASIBLE: u8 = 2;
const EXIT_UNVERIFIED: u8 = 3;
const EXIT_CONFIG: u8 = 4;
const EXIT_SOLVER: u8 = 1;

#[derive(Parser)]
#[command(name = "qddc", version, about = "Data-driven superstabilization under quantization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample interval-quantized transitions of a plant.
    Gendata(GendataArgs),
    /// Synthesize a controller certificate; the result is audited before it is written.
    Synthesize(SynthesizeArgs),
    /// Audit a certificate against data or a known plant.
    Verify(VerifyArgs),
    /// Simulate the quantized closed loop of a certificate's controller.
    Simulate(SimulateArgs),
    /// Bisect for the smallest feasible quantizer density.
    Minrho(MinrhoArgs),
    /// Minimized gain over a grid of densities, as CSV.
    Sweep(SweepArgs),
    /// Remove redundant rows from a consistency polytope.
    Prune(PruneArgs),
}

#[derive(Args)]
struct Source {
    /// Built-in plant (sys1, sys2, sys2-half) or a JSON file with "A" and "B".
    #[arg(long)]
    system: Option<String>,
    /// Dataset JSON written by `gendata`.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Drop redundant rows of the data polytope before synthesis.
    #[arg(long)]
    prune: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    Feasibility,
    MinLambda,
}

impl From<ObjectiveArg> for Objective {
    fn from(o: ObjectiveArg) -> Self {
        match o {
            ObjectiveArg::Feasibility => Objective::Feasibility,
            ObjectiveArg::MinLambda => Objective::MinimizeLambda,
        }
    }
}

#[derive(Args)]
struct Synthesis {
    /// sign, aarc or nominal.
    #[arg(long, default_value = "sign")]
    method: Method,
    /// ss or ess.
    #[arg(long, default_value = "ss")]
    mode: StabilityMode,
    /// Stability tolerance.
    #[arg(long, default_value_t = DEFAULT_ETA)]
    eta: f64,
}

impl Synthesis {
    fn config(&self, objective: Objective) -> ExperimentConfig {
        ExperimentConfig {
            objective,
            eta: self.eta,
            ..ExperimentConfig::new(self.method, self.mode)
        }
    }
}

#[derive(Args)]
struct GendataArgs {
    #[arg(long)]
    system: String,
    /// Built-in partition (coarse, fine) or a JSON file with "edges".
    #[arg(long, default_value = "coarse")]
    partition: String,
    /// Number of transitions.
    #[arg(short = 'T', long = "samples")]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Half-width of uniform process noise.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthesizeArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    synthesis: Synthesis,
    /// Logarithmic quantizer density applied to every input.
    #[arg(long)]
    rho: f64,
    #[arg(long, value_enum, default_value = "feasibility")]
    objective: ObjectiveArg,
    /// Write the certificate even when the audit fails.
    #[arg(long)]
    unchecked: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: Source,
    /// Certificate JSON written by `synthesize`.
    #[arg(long)]
    cert: PathBuf,
    /// Density to audit at, defaulting to the certificate's own.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    system: String,
    #[arg(long)]
    cert: PathBuf,
    /// Initial state as comma-separated values; defaults to all ones.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    #[arg(long, default_value_t = 200)]
    steps: usize,
    /// Density of the simulated quantizer, defaulting to the certificate's own.
    #[arg(long)]
    rho: Option<f64>,
    /// Trajectory CSV; a JSON summary goes to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct MinrhoArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    synthesis: Synthesis,
    /// Bisection tolerance.
    #[arg(long, default_value_t = 1e-4)]
    tol: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    source: Source,
    #[command(flatten)]
    synthesis: Synthesis,
    /// Explicit comma-separated densities; otherwise a log grid.
    #[arg(long, value_delimiter = ',')]
    rho: Option<Vec<f64>>,
    #[arg(long, default_value_t = 0.05)]
    grid_lo: f64,
    #[arg(long, default_value_t = 1.0)]
    grid_hi: f64,
    #[arg(long, default_value_t = 25)]
    points: usize,
    /// Evaluate grid points in parallel.
    #[arg(long)]
    parallel: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PruneArgs {
    /// Dataset JSON; the polytope is built from it.
    #[arg(long, conflicts_with = "polytope")]
    data: Option<PathBuf>,
    /// Polytope JSON with "G" and "h".
    #[arg(long)]
    polytope: Option<PathBuf>,
    /// Also prove mutual containment with Farkas certificates.
    #[arg(long)]
    check: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn pretty(value: &impl serde::Serialize) -> anyhow::Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn load_system(name: &str) -> anyhow::Result<LinearSystem> {
    match builtin_system(name) {
        Ok(sys) => Ok(sys),
        Err(_) if Path::new(name).exists() => read_json(Path::new(name)),
        Err(e) => Err(e.into()),
    }
}

fn load_partition(name: &str) -> anyhow::Result<Partition> {
    match builtin_partition(name) {
        Ok(p) => Ok(p),
        Err(_) if Path::new(name).exists() => read_json(Path::new(name)),
        Err(e) => Err(e.into()),
    }
}

fn load_dataset(path: &Path) -> anyhow::Result<Dataset> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(Dataset::from_json(&text)?)
}

/// Loaded problem source. Data methods need a dataset, the nominal method a
/// plant.
enum Loaded {
    Plant(LinearSystem),
    Data(Polytope, usize),
}

impl Loaded {
    fn from_source(source: &Source, method: Method) -> anyhow::Result<Self> {
        match (method, &source.system, &source.data) {
            (Method::Nominal, Some(sys), _) => Ok(Loaded::Plant(load_system(sys)?)),
            (Method::Nominal, None, _) => bail!("the nominal method needs --system"),
            (_, _, Some(path)) => {
                let ds = load_dataset(path)?;
                let (_, m) = ds.dims().ok_or_else(|| anyhow!("dataset {} is empty", path.display()))?;
                let mut polytope = build_polytope(&ds)?;
                if source.prune {
                    polytope = prune_redundant(&polytope)?;
                }
                Ok(Loaded::Data(polytope, m))
            }
            (_, _, None) => bail!("data-driven methods need --data"),
        }
    }

    fn instance(&self) -> Instance<'_> {
        match self {
            Loaded::Plant(sys) => Instance::Plant(sys),
            Loaded::Data(polytope, m) => Instance::Data { polytope, m: *m },
        }
    }
}

fn gendata(args: &GendataArgs) -> anyhow::Result<u8> {
    let sys = load_system(&args.system)?;
    let partition = load_partition(&args.partition)?;
    let excitation = Excitation {
        noise: args.noise,
        ..Excitation::default()
    };
    let ds = generate_dataset(&sys, &partition, args.samples, args.seed, &excitation)?;
    emit(args.out.as_deref(), &(ds.to_json()? + "\n"))?;
    Ok(0)
}

fn synthesize_cmd(args: &SynthesizeArgs) -> anyhow::Result<u8> {
    let method = args.synthesis.method;
    let loaded = Loaded::from_source(&args.source, method)?;
    let config = args.synthesis.config(args.objective.into());
    let Some(result) = synthesize(loaded.instance(), &config, args.rho)?.certified() else {
        eprintln!("infeasible at rho = {}", args.rho);
        let body = json!({ "status": "infeasible", "method": method, "mode": config.mode, "rho": args.rho });
        emit(args.out.as_deref(), &pretty(&body)?)?;
        return Ok(EXIT_INFEASIBLE);
    };
    let file = CertificateFile::new(&result, method, args.rho, "verified");
    let spec = file.spec()?;
    let verified = match &loaded {
        Loaded::Plant(sys) => {
            let check = check_cert(sys, &result.cert, &spec)?;
            eprintln!("certificate check margin {:e}", check.margin);
            check.valid
        }
        Loaded::Data(polytope, _) => {
            let report = robust_verify(polytope, &result.cert.v, &result.cert.s, &spec, result.cert.eta)?;
            eprintln!("robust verification worst margin {:e}", report.worst_margin);
            report.verified
        }
    };
    if !verified && !args.unchecked {
        eprintln!("refusing to write a certificate that failed verification (pass --unchecked to override)");
        return Ok(EXIT_UNVERIFIED);
    }
    let file = CertificateFile {
        status: if verified { "verified" } else { "unverified" }.into(),
        ..file
    };
    emit(args.out.as_deref(), &pretty(&file)?)?;
    Ok(if verified { 0 } else { EXIT_UNVERIFIED })
}

fn verify_cmd(args: &VerifyArgs) -> anyhow::Result<u8> {
    let file: CertificateFile = read_json(&args.cert)?;
    let cert = file.to_certificate()?;
    let spec = match args.rho {
        Some(rho) => qddc::QuantizerSpec::uniform(file.s.len(), rho)?,
        None => file.spec()?,
    };
    let (verified, body) = if let Some(path) = &args.source.data {
        let ds = load_dataset(path)?;
        let polytope = build_polytope(&ds)?;
        let report = robust_verify(&polytope, &cert.v, &cert.s, &spec, cert.eta)?;
        (report.verified, serde_json::to_value(&report)?)
    } else if let Some(name) = &args.source.system {
        let sys = load_system(name)?;
        let check = check_cert(&sys, &cert, &spec)?;
        let gain = closed_loop_vertex_gain(&sys, &cert.k, &cert.v, &spec)?;
        // the vertex gain decides; the bound-matrix check is reported for
        // certificates that carry one
        let valid = gain <= cert.lambda + 1e-9 && gain < 1.0;
        let body = json!({
            "verified": valid,
            "bound_margin": check.margin,
            "vertex_gain": gain,
            "lambda": cert.lambda,
        });
        (valid, body)
    } else {
        bail!("verify needs --data or --system");
    };
    emit(args.out.as_deref(), &pretty(&body)?)?;
    Ok(if verified { 0 } else { EXIT_UNVERIFIED })
}

fn simulate_cmd(args: &SimulateArgs) -> anyhow::Result<u8> {
    let sys = load_system(&args.system)?;
    let file: CertificateFile = read_json(&args.cert)?;
    let cert = file.to_certificate()?;
    let spec = match args.rho {
        Some(rho) => qddc::QuantizerSpec::uniform(sys.m(), rho)?,
        None => file.spec()?,
    };
    let x0 = match &args.x0 {
        Some(x) => nalgebra::DVector::from_column_slice(x),
        None => nalgebra::DVector::from_element(sys.n(), 1.0),
    };
    let traj = simulate_quantized(&sys, &cert.k, &spec, &x0, args.steps)?;
    let decays = !traj.diverged && decay_check(&traj, &cert.v, cert.lambda);
    match &args.out {
        Some(path) => {
            fs::write(path, traj.to_csv()).with_context(|| format!("writing {}", path.display()))?;
            let last = traj.states.last().map(|x| x.amax()).unwrap_or(0.0);
            let summary = json!({
                "steps": traj.states.len() - 1,
                "diverged": traj.diverged,
                "decay_check": decays,
                "final_max_abs": last,
            });
            print!("{}", pretty(&summary)?);
        }
        None => print!("{}", traj.to_csv()),
    }
    if !decays {
        eprintln!("trajectory does not decay at rate lambda = {}", cert.lambda);
    }
    Ok(if decays { 0 } else { EXIT_UNVERIFIED })
}

fn minrho_cmd(args: &MinrhoArgs) -> anyhow::Result<u8> {
    let loaded = Loaded::from_source(&args.source, args.synthesis.method)?;
    let config = args.synthesis.config(Objective::Feasibility);
    let rho = min_rho(loaded.instance(), &config, args.tol)?;
    let body = json!({
        "method": config.method,
        "mode": config.mode,
        "tol": args.tol,
        "min_rho": rho,
    });
    emit(args.out.as_deref(), &pretty(&body)?)?;
    Ok(if rho.is_some() { 0 } else { EXIT_INFEASIBLE })
}

fn sweep_cmd(args: &SweepArgs) -> anyhow::Result<u8> {
    let loaded = Loaded::from_source(&args.source, args.synthesis.method)?;
    let config = args.synthesis.config(Objective::MinimizeLambda);
    let grid = match &args.rho {
        Some(list) => {
            if list.iter().any(|r| !(*r > 0.0 && *r <= 1.0)) {
                bail!("grid densities must lie in (0, 1]");
            }
            list.clone()
        }
        None => log_grid(args.grid_lo, args.grid_hi, args.points)?,
    };
    let points = sweep(loaded.instance(), &config, &grid, args.parallel)?;
    emit(args.out.as_deref(), &sweep_csv(&points))?;
    Ok(0)
}

fn prune_cmd(args: &PruneArgs) -> anyhow::Result<u8> {
    let polytope: Polytope = match (&args.data, &args.polytope) {
        (Some(path), _) => build_polytope(&load_dataset(path)?)?,
        (None, Some(path)) => read_json(path)?,
        (None, None) => bail!("prune needs --data or --polytope"),
    };
    let pruned = prune_redundant(&polytope)?;
    eprintln!("{} rows -> {} rows", polytope.faces(), pruned.faces());
    if args.check {
        let forward = check_containment_farkas(&polytope, &pruned)?;
        let backward = check_containment_farkas(&pruned, &polytope)?;
        eprintln!("mutual containment: {}", forward && backward);
        if !(forward && backward) {
            return Ok(EXIT_UNVERIFIED);
        }
    }
    emit(args.out.as_deref(), &pretty(&pruned)?)?;
    Ok(0)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<qddc::Error>() {
        Some(qddc::Error::Solver(_)) => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Gendata(a) => gendata(a),
        Command::Synthesize(a) => synthesize_cmd(a),
        Command::Verify(a) => verify_cmd(a),
        Command::Simulate(a) => simulate_cmd(a),
        Command::Minrho(a) => minrho_cmd(a),
        Command::Sweep(a) => sweep_cmd(a),
        Command::Prune(a) => prune_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
