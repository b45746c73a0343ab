//! `dstbc` command line: inspect, check and simulate distributed space-time
//! block codes.
//!
//! Exit status: 0 on success, 1 when a check fails, 2 on usage or input errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dstbc::channel::{
    empirical_noise_covariance, noise_covariance, relative_frobenius_error, ChannelRealization,
    PowerConfig,
};
use dstbc::construct::{bits_per_channel_use, rate_cspcu};
use dstbc::design::CodProfile;
use dstbc::diversity::{
    check, covariance_bound_selftest, relay_failure_sweep, subspace_duality_selftest, Criterion,
};
use dstbc::sim::{run_ber_with_code, ExperimentConfig};
use dstbc::streams::substream;
use dstbc::{build, Code, DecoderKind, Error};

#[derive(Parser)]
#[command(
    name = "dstbc",
    version,
    about = "Distributed space-time block codes with PIC / PIC-SIC decoding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the parameters of a code.
    Info(CodeArgs),
    /// Run the full-diversity checks and print the reports as JSON.
    Check(CheckArgs),
    /// Run a Monte-Carlo bit-error-rate simulation and write CSV.
    Simulate(SimulateArgs),
    /// Run the built-in numerical self-tests.
    Selftest(SelftestArgs),
}

#[derive(Args, Clone)]
struct CodeArgs {
    /// Named code family member.
    #[arg(long)]
    preset: Option<String>,
    /// JSON code document (takes precedence over --preset).
    #[arg(long)]
    design_file: Option<PathBuf>,
    /// Number of relays.
    #[arg(long = "N")]
    relays: Option<usize>,
    /// Real symbols per decoding group.
    #[arg(long)]
    lambda: Option<usize>,
    /// Number of diagonal layers.
    #[arg(long = "n")]
    layers: Option<usize>,
    /// Points per group signal set (default: 2 per real symbol).
    #[arg(long)]
    alphabet: Option<usize>,
    /// Flat JSON experiment configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CriterionArg {
    Pic,
    PicSic,
    Zf,
    All,
}

#[derive(Args)]
struct CheckArgs {
    #[command(flatten)]
    code: CodeArgs,
    #[arg(long, value_enum, default_value = "pic-sic")]
    criterion: CriterionArg,
    /// Random interference draws per (group, difference) pair.
    #[arg(long, default_value_t = dstbc::diversity::DEFAULT_TRIALS)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also check every code with up to this many relays removed (PIC-SIC).
    #[arg(long)]
    max_drop: Option<usize>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    code: CodeArgs,
    /// Destination antennas.
    #[arg(long)]
    nd: Option<usize>,
    #[arg(long)]
    decoder: Option<String>,
    #[arg(long, allow_negative_numbers = true)]
    snr_start: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_stop: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    snr_step: Option<f64>,
    /// Maximum trials per SNR point.
    #[arg(long)]
    trials: Option<u64>,
    /// Stop a point after this many bit errors (0 disables).
    #[arg(long)]
    max_errors: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output CSV path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelftestArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

/// Failure categories mapped onto exit codes.
enum Failure {
    Usage(String),
    Check,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match std::env::var("DSTBC_THREADS") {
        Err(_) => run(cli),
        Ok(v) => match v.parse::<usize>() {
            Ok(n) if n > 0 => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                Ok(pool) => pool.install(|| run(cli)),
                Err(e) => Err(Failure::Usage(format!(
                    "cannot start {n} worker threads: {e}"
                ))),
            },
            _ => Err(Failure::Usage(format!(
                "DSTBC_THREADS must be a positive integer, got '{v}'"
            ))),
        },
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Check) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Info(args) => info(&args),
        Command::Check(args) => check_cmd(&args),
        Command::Simulate(args) => simulate(&args),
        Command::Selftest(args) => selftest(&args),
    }
}

/// Loads `--config` (if any) and applies the code flags on top.
fn base_config(args: &CodeArgs) -> Result<ExperimentConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Failure::Usage(format!("cannot read {}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text)?
        }
        None => ExperimentConfig::default(),
    };
    if args.preset.is_some() {
        cfg.preset.clone_from(&args.preset);
    }
    if args.design_file.is_some() {
        cfg.design_file.clone_from(&args.design_file);
    }
    cfg.relays = args.relays.or(cfg.relays);
    cfg.lambda = args.lambda.or(cfg.lambda);
    cfg.layers = args.layers.or(cfg.layers);
    cfg.alphabet = args.alphabet.or(cfg.alphabet);
    Ok(cfg)
}

fn info(args: &CodeArgs) -> Result<(), Failure> {
    let cfg = base_config(args)?;
    let code: Code = cfg.build_code()?;
    let lambda = code.grouping().lambda_max();
    println!("N = {}", code.relays());
    println!("lambda = {lambda}");
    if let Some(p) = code.params() {
        println!("n = {}", p.layers);
    }
    println!("K = {}", code.num_symbols());
    match code.t1() {
        Some(t1) => println!("T1 = {t1}"),
        None => println!("T1 = (not conjugate linear)"),
    }
    println!("T2 = {}", code.t2());
    println!("g = {}", code.grouping().len());
    if let Some(form) = code.relay_form() {
        println!("S = {:?}", form.conjugated());
        println!("R = {}", rate_cspcu(&code)?);
        println!("bpcu = {}", bits_per_channel_use(&code)?);
    }
    println!("bits_per_codeword = {}", code.bits_per_codeword());
    Ok(())
}

fn check_cmd(args: &CheckArgs) -> Result<(), Failure> {
    let cfg = base_config(&args.code)?;
    let code: Code = cfg.build_code()?;
    let criteria: Vec<Criterion> = match args.criterion {
        CriterionArg::Pic => vec![Criterion::Pic],
        CriterionArg::PicSic => vec![Criterion::PicSic],
        CriterionArg::Zf => vec![Criterion::Zf],
        CriterionArg::All => Criterion::ALL.to_vec(),
    };
    let mut rng = substream(args.seed, 0);
    let reports: Vec<_> = criteria
        .iter()
        .map(|&c| check(&code, c, args.trials, &mut rng))
        .collect();
    let mut passed = reports.iter().all(|r| r.passed);
    let json = match args.max_drop {
        None if reports.len() == 1 => serde_json::to_string_pretty(&reports[0]),
        None => serde_json::to_string_pretty(&reports),
        Some(a) => {
            let sweep = relay_failure_sweep(&code, a, args.trials, &mut rng)?;
            passed &= sweep.iter().all(|r| r.report.passed);
            serde_json::to_string_pretty(
                &serde_json::json!({ "reports": reports, "relay_failures": sweep }),
            )
        }
    }
    .expect("reports serialise");
    println!("{json}");
    if passed {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}

/// `start, start + step, …` up to `stop`, rounded to 1e-9 dB.
fn snr_grid(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, Failure> {
    if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
        return Err(Failure::Usage(format!(
            "malformed SNR grid: start {start}, stop {stop}, step {step}"
        )));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count)
        .map(|i| ((start + i as f64 * step) * 1e9).round() / 1e9)
        .collect())
}

fn simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let mut cfg = base_config(&args.code)?;
    match (args.snr_start, args.snr_stop, args.snr_step) {
        (None, None, None) => {}
        (Some(start), stop, step) => {
            cfg.snr_grid_db = snr_grid(start, stop.unwrap_or(start), step.unwrap_or(1.0))?;
        }
        _ => {
            return Err(Failure::Usage(
                "--snr-stop/--snr-step need --snr-start".into(),
            ))
        }
    }
    if let Some(nd) = args.nd {
        cfg.nd = nd;
    }
    if let Some(d) = &args.decoder {
        cfg.decoder = d.parse::<DecoderKind>()?;
    }
    cfg.max_trials = args.trials.unwrap_or(cfg.max_trials);
    cfg.max_bit_errors = args.max_errors.unwrap_or(cfg.max_bit_errors);
    cfg.master_seed = args.seed.unwrap_or(cfg.master_seed);
    cfg.validate()?;
    let code: Code = cfg.build_code()?;
    let curve = run_ber_with_code(&code, &cfg)?;
    let csv = curve.to_csv();
    match &args.out {
        Some(path) => std::fs::write(path, csv)
            .map_err(|e| Failure::Usage(format!("cannot write {}: {e}", path.display())))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn selftest(args: &SelftestArgs) -> Result<(), Failure> {
    let mut rng = substream(args.seed, 1);
    let mut all = true;
    let mut report = |name: &str, ok: bool, detail: String| {
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
        all &= ok;
    };

    let cods = [
        ("trivial", CodProfile::<f64>::trivial()),
        ("alamouti", CodProfile::alamouti()),
    ];
    for (name, cod) in &cods {
        report(
            &format!("cod-identity-{name}"),
            cod.verify(),
            "A_iᴴA_j + A_jᴴA_i = 2δ_ij I".into(),
        );
    }

    let code: Code = build(2, &CodProfile::trivial(), 1, 2)?;
    let power = PowerConfig::for_code(&code, 10.0)?;
    let ok = covariance_bound_selftest(&code, &power, 2, 100, &mut rng)?;
    report(
        "covariance-bound",
        ok,
        "Tr(Γ) ≤ α and λ_max(Γ) ≤ α on 100 channels".into(),
    );

    let ok = subspace_duality_selftest(6, 100, &mut rng);
    report(
        "subspace-duality",
        ok,
        "(A V′)^⊥ = A⁻¹ V′^⊥ on 100 instances".into(),
    );

    let draws = 100_000;
    for i in 0..3 {
        let ch = ChannelRealization::draw(code.relays(), 2, &mut rng);
        let noise = noise_covariance(&code, &ch, &power)?;
        let emp = empirical_noise_covariance(&code, &ch, &power, draws, &mut rng)?;
        let err = relative_frobenius_error(&emp, &noise.gamma);
        report(
            &format!("noise-covariance-{i}"),
            err < 0.03,
            format!("relative error {err:.4} over {draws} draws"),
        );
    }

    if all {
        Ok(())
    } else {
        Err(Failure::Check)
    }
}
