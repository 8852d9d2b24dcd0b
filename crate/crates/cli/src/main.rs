//! `bmfact` — factorizability oracle, counterexample factory, verifier,
//! factorized solver and sweep harness for nuclear-norm-regularized
//! problems.
//!
//! Exit codes are a stable contract:
//! 0 success (oracle: factorizable), 10 not factorizable, 11 forge refused,
//! 12 verification failed, 2 bad input, 3 I/O failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bmfact::io::{self, InstanceKind, ObjectivePayload};
use bmfact::*;

const EXIT_OK: u8 = 0;
const EXIT_BAD_INPUT: u8 = 2;
const EXIT_IO: u8 = 3;
const EXIT_NOT_FACTORIZABLE: u8 = 10;
const EXIT_FORGE_REFUSED: u8 = 11;
const EXIT_VERIFY_FAILED: u8 = 12;

#[derive(Parser)]
#[command(name = "bmfact", version, about = "Burer-Monteiro factorizability toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Regime flags shared by several subcommands.
#[derive(Args, Clone)]
struct RegimeArgs {
    /// Number of rows (m <= n).
    #[arg(long)]
    m: usize,
    /// Number of columns.
    #[arg(long)]
    n: usize,
    /// Factorization rank.
    #[arg(long)]
    r: usize,
    /// Solution rank.
    #[arg(long)]
    rstar: usize,
    /// Gradient Lipschitz constant.
    #[arg(long = "L")]
    l: f64,
    /// Strong convexity modulus.
    #[arg(long)]
    mu: f64,
    /// Nuclear-norm weight.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl RegimeArgs {
    fn params(&self) -> Result<RegimeParams> {
        RegimeParams::new(self.m, self.n, self.r, self.rstar, self.l, self.mu, self.lambda)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Decide whether every second-order stationary pair maps to a global
    /// minimizer in this regime.
    Oracle {
        #[command(flatten)]
        regime: RegimeArgs,
        /// Print the verdict as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Construct a certified counterexample instance and write it to a file.
    Forge {
        #[command(flatten)]
        regime: RegimeArgs,
        /// Output instance file.
        #[arg(long)]
        out: PathBuf,
        /// Witness scale.
        #[arg(long, default_value_t = 1.0)]
        w: f64,
        /// Seed for the verification sampling.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the verification report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Re-run verification on a stored counterexample instance.
    Verify {
        /// Input instance file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Gradient residual tolerance, relative to 1 + the gradient norm.
        #[arg(long = "tol-g")]
        tol_g: Option<f64>,
        /// Hessian eigenvalue tolerance.
        #[arg(long = "tol-h")]
        tol_h: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Print the verification report as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Minimize the factorized objective from a stored instance or a
    /// randomly generated one.
    Solve {
        /// Input instance file (counterexample or quadratic_objective).
        #[arg(long = "in", conflicts_with = "m")]
        input: Option<PathBuf>,
        #[arg(long, requires_all = ["n", "r", "rstar", "l", "mu"])]
        m: Option<usize>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        r: Option<usize>,
        #[arg(long)]
        rstar: Option<usize>,
        #[arg(long = "L")]
        l: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        /// Start at the stored stationary pair instead of a random point
        /// (counterexample inputs only).
        #[arg(long)]
        from_spurious: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 5000)]
        max_iters: usize,
        /// Use a fixed step of this size instead of backtracking.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long = "grad-tol")]
        grad_tol: Option<f64>,
        #[arg(long = "eig-tol")]
        eig_tol: Option<f64>,
    },
    /// Run the solver over a grid of regimes and write a CSV phase table.
    Sweep {
        /// Grid file (instance kind "regime" holding one regime or an
        /// array), or "default" for the built-in grid.
        #[arg(long, default_value = "default")]
        grid: String,
        #[arg(long, default_value_t = 5)]
        trials: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Check the paired permutation bound: exact assignment value,
    /// brute-force enumeration (m <= 7), and random orthogonal sampling.
    TraceIneq {
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 10000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Io(_) | Error::Json(_) | Error::Schema(_) => EXIT_IO,
        Error::FactorizableRegime(_) => EXIT_FORGE_REFUSED,
        _ => EXIT_BAD_INPUT,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    match cli.command {
        Command::Oracle { regime, json } => cmd_oracle(&regime, json),
        Command::Forge { regime, out, w, seed, json } => cmd_forge(&regime, &out, w, seed, json),
        Command::Verify { input, tol_g, tol_h, seed, json } => {
            cmd_verify(&input, tol_g, tol_h, seed, json)
        }
        Command::Solve {
            input,
            m,
            n,
            r,
            rstar,
            l,
            mu,
            lambda,
            from_spurious,
            seed,
            max_iters,
            eta,
            grad_tol,
            eig_tol,
        } => {
            let regime = match (m, n, r, rstar, l, mu) {
                (Some(m), Some(n), Some(r), Some(rstar), Some(l), Some(mu)) => {
                    Some(RegimeParams::new(m, n, r, rstar, l, mu, lambda)?)
                }
                _ => None,
            };
            cmd_solve(SolveInput {
                input,
                regime,
                from_spurious,
                seed,
                max_iters,
                eta,
                grad_tol,
                eig_tol,
            })
        }
        Command::Sweep { grid, trials, out, seed } => cmd_sweep(&grid, trials, &out, seed),
        Command::TraceIneq { m, samples, seed } => cmd_trace_ineq(m, samples, seed),
    }
}

fn cmd_oracle(regime: &RegimeArgs, json: bool) -> Result<u8> {
    let params = regime.params()?;
    let verdict = oracle(&params);
    if json {
        println!("{}", io::to_json_string(&verdict)?);
    } else {
        println!(
            "factorizable: {} (scenario {:?}, reason: {})",
            verdict.factorizable, verdict.scenario, verdict.reason
        );
        if let Some(wit) = &verdict.witness {
            println!("reduced witness: d = {}, w = {}", wit.d, wit.w);
        }
        if let Some(alpha) = verdict.alpha {
            println!("alpha = {alpha}");
        }
    }
    Ok(if verdict.factorizable { EXIT_OK } else { EXIT_NOT_FACTORIZABLE })
}

fn cmd_forge(regime: &RegimeArgs, out: &Path, w: f64, seed: u64, json: bool) -> Result<u8> {
    let params = regime.params()?;
    let inst = forge_with_scale(&params, w)?;
    let opts = VerifyOptions { seed, ..VerifyOptions::default() };
    let report = verify_counterexample(&inst, &opts);
    io::save_instance(out, InstanceKind::Counterexample, &inst)?;
    print_report(&report, json)?;
    if !json {
        println!("instance written to {}", out.display());
    }
    Ok(if report.all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn cmd_verify(
    input: &Path,
    tol_g: Option<f64>,
    tol_h: Option<f64>,
    seed: u64,
    json: bool,
) -> Result<u8> {
    let inst: CounterexampleInstance = io::load_instance(input, InstanceKind::Counterexample)?;
    let mut opts = VerifyOptions { seed, ..VerifyOptions::default() };
    if let Some(g) = tol_g {
        opts.grad_rel_tol = g;
    }
    if let Some(h) = tol_h {
        opts.hess_eig_tol = h;
    }
    let report = verify_counterexample(&inst, &opts);
    print_report(&report, json)?;
    Ok(if report.all_pass { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn print_report(report: &VerificationReport, json: bool) -> Result<()> {
    if json {
        println!("{}", io::to_json_string(report)?);
        return Ok(());
    }
    println!("grad residual        {:.3e}", report.grad_fr_residual);
    println!("min Hessian eig      {:.3e}", report.min_hessian_eig);
    println!("objective gap        {:.6e}", report.f_gap);
    println!("competitor stationary {}", report.xstar_is_stationary);
    println!("spectral excess      {:.6e}", report.xbar_spectral_excess);
    println!("curvature bounds ok  {}", report.bounds_ok);
    println!("pairing gap          {:.3e}", report.gap_ineq_value);
    if report.all_pass {
        println!("all checks passed");
    } else {
        println!("FAILED checks: {}", report.failures.join(", "));
    }
    Ok(())
}

struct SolveInput {
    input: Option<PathBuf>,
    regime: Option<RegimeParams>,
    from_spurious: bool,
    seed: u64,
    max_iters: usize,
    eta: Option<f64>,
    grad_tol: Option<f64>,
    eig_tol: Option<f64>,
}

fn cmd_solve(args: SolveInput) -> Result<u8> {
    let mut opts = SolverOptions { seed: args.seed, max_iters: args.max_iters, ..Default::default() };
    if let Some(eta) = args.eta {
        opts.step_rule = StepRule::FixedStep { eta };
    }
    if let Some(g) = args.grad_tol {
        opts.grad_tol = g;
    }
    if let Some(e) = args.eig_tol {
        opts.eig_tol = e;
    }

    let (h, lambda, r, start) = match (&args.input, &args.regime) {
        (Some(path), _) => {
            let text = std::fs::read_to_string(path)?;
            match io::peek_kind(&text)? {
                InstanceKind::Counterexample => {
                    let inst: CounterexampleInstance =
                        io::instance_from_str(&text, InstanceKind::Counterexample)?;
                    let start = if args.from_spurious { Some(inst.pair.clone()) } else { None };
                    (inst.h, inst.params.lambda, inst.params.r, start)
                }
                InstanceKind::QuadraticObjective => {
                    let payload: ObjectivePayload =
                        io::instance_from_str(&text, InstanceKind::QuadraticObjective)?;
                    (payload.objective, payload.lambda, payload.r, None)
                }
                other => {
                    return Err(Error::Schema(format!(
                        "solve expects a counterexample or quadratic_objective file, found {other}"
                    )))
                }
            }
        }
        (None, Some(params)) => {
            let (h, _target) = random_psd_instance(params, args.seed)?;
            (h, params.lambda, params.r, None)
        }
        (None, None) => {
            return Err(Error::InvalidInput(
                "pass --in FILE or the full regime flags (--m --n --r --rstar --L --mu)".into(),
            ))
        }
    };

    let (m, n) = h.dims();
    let init = start.unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
        FactorPair::new(gaussian(m, r, &mut rng).scale(0.5), gaussian(n, r, &mut rng).scale(0.5))
            .expect("widths match")
    });
    let trace = solve(&h, lambda, r, &init, &opts)?;
    let last = trace.iterates.last().expect("at least one iterate");
    println!("iterations           {}", trace.iterates.len());
    println!("final objective      {:.9e}", last.objective);
    println!("grad residual        {:.3e}", trace.report.grad_residual);
    println!("min Hessian eig      {:.3e}", trace.report.min_hessian_eig);
    println!("verdict              {:?}", trace.report.verdict);
    println!("classification       {:?}", trace.classification);
    if m == 1 && n == 1 && r == 1 {
        println!(
            "product uv           {:.9}",
            trace.final_pair.u[(0, 0)] * trace.final_pair.v[(0, 0)]
        );
    }
    Ok(EXIT_OK)
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Mat {
    Mat::from_fn(rows, cols, |_, _| {
        let u1: f64 = rng.random::<f64>().max(1e-300);
        let u2: f64 = rng.random();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    })
}

fn default_grid() -> Vec<RegimeParams> {
    let mut grid = Vec::new();
    for kappa in [2.0, 3.0, 4.0] {
        grid.push(RegimeParams::new(3, 3, 1, 1, kappa, 1.0, 1.0).expect("valid default cell"));
    }
    grid
}

fn cmd_sweep(grid_arg: &str, trials: usize, out: &PathBuf, seed: u64) -> Result<u8> {
    configure_threads();
    let grid = if grid_arg == "default" {
        default_grid()
    } else {
        let text = std::fs::read_to_string(PathBuf::from(grid_arg))?;
        match io::instance_from_str::<Vec<RegimeParams>>(&text, InstanceKind::Regime) {
            Ok(cells) => cells,
            Err(_) => vec![io::instance_from_str::<RegimeParams>(&text, InstanceKind::Regime)?],
        }
    };
    let opts = SolverOptions { seed, ..SolverOptions::default() };
    let table = sweep(&grid, trials, &opts)?;
    let file = std::fs::File::create(out)?;
    table.write_csv(file)?;
    for cell in &table.cells {
        println!(
            "m={} r={} r*={} kappa={:.3} lambda={} oracle={} global={} spurious={} undetermined={}",
            cell.params.m,
            cell.params.r,
            cell.params.r_star,
            cell.params.kappa(),
            cell.params.lambda,
            cell.oracle_factorizable,
            cell.n_global,
            cell.n_spurious,
            cell.n_undetermined
        );
    }
    println!("phase table written to {}", out.display());
    Ok(EXIT_OK)
}

/// Cap rayon's worker count from BMF_THREADS when set.
fn configure_threads() {
    if let Ok(v) = std::env::var("BMF_THREADS") {
        if let Ok(k) = v.parse::<usize>() {
            if k >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(k).build_global();
            }
        }
    }
}

fn cmd_trace_ineq(m: usize, samples: usize, seed: u64) -> Result<u8> {
    if m == 0 {
        return Err(Error::InvalidInput("m must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gen = |rng: &mut ChaCha8Rng| (0..m).map(|_| 2.0 * rng.random::<f64>()).collect::<Vec<f64>>();
    let (da, db, dc, dd) = (gen(&mut rng), gen(&mut rng), gen(&mut rng), gen(&mut rng));
    let res = max_permutation_pairing(&da, &db, &dc, &dd)?;
    println!("assignment value     {:.12}", res.value);

    if m <= 7 {
        let brute = brute_force_pairing(&da, &db, &dc, &dd);
        println!("brute-force value    {:.12}", brute);
        if (brute - res.value).abs() > 1e-12 * (1.0 + brute.abs()) {
            println!("MISMATCH between assignment and brute force");
            return Ok(EXIT_VERIFY_FAILED);
        }
    } else {
        println!("brute-force value    skipped (m > 7)");
    }

    let diag = |v: &[f64]| Mat::tilde_diag(v, m, m);
    let (wr, wp) = witness_orthogonal_pair(&res.perm, m, m)?;
    let witness_value =
        lhs_trace_form(&wr, &wp, &diag(&da), &diag(&db), &diag(&dc), &diag(&dd))?;
    println!("witness value        {:.12}", witness_value);

    let mut max_sampled = f64::NEG_INFINITY;
    for k in 0..samples as u64 {
        let r = random_orthogonal(m, seed.wrapping_add(2 * k + 1))?;
        let p = random_orthogonal(m, seed.wrapping_add(2 * k + 2))?;
        let value = lhs_trace_form(&r, &p, &diag(&da), &diag(&db), &diag(&dc), &diag(&dd))?;
        max_sampled = max_sampled.max(value);
    }
    println!("max sampled value    {:.12}", max_sampled);
    let ok = max_sampled <= res.value + 1e-9;
    println!("sampled <= assignment: {ok}");
    Ok(if ok { EXIT_OK } else { EXIT_VERIFY_FAILED })
}

fn brute_force_pairing(da: &[f64], db: &[f64], dc: &[f64], dd: &[f64]) -> f64 {
    let m = da.len();
    let mut best = f64::NEG_INFINITY;
    let mut perm: Vec<usize> = (0..m).collect();
    // Heap's algorithm over all permutations.
    fn heap(k: usize, perm: &mut Vec<usize>, visit: &mut impl FnMut(&[usize])) {
        if k <= 1 {
            visit(perm);
            return;
        }
        for i in 0..k {
            heap(k - 1, perm, visit);
            if k.is_multiple_of(2) {
                perm.swap(i, k - 1);
            } else {
                perm.swap(0, k - 1);
            }
        }
    }
    heap(m, &mut perm, &mut |p: &[usize]| {
        let v: f64 = (0..m).map(|i| da[i] * db[p[i]] + dc[i] * dd[p[i]]).sum();
        if v > best {
            best = v;
        }
    });
    best
}
