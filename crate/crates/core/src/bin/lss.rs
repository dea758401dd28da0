use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spiked_lss::harness::{
    resolve_config, run_experiment, run_verification_suite, write_verification, DistPool,
    SimulateArgs,
};
use spiked_lss::Error;

#[derive(Parser)]
#[command(name = "lss", version = spiked_lss::VERSION, about = "Linear spectral statistics of spiked sample covariance matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo replication of the whitened (T1, T2) statistic
    Simulate(SimulateArgs),
    /// Check moment identities against exhaustive enumeration
    Verify(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    /// Largest matrix dimension (at most 4)
    #[arg(long, default_value_t = 3)]
    max_dim: usize,
    /// Number of random cases
    #[arg(long, default_value_t = 200)]
    cases: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Only draw Rademacher innovations
    #[arg(long)]
    rademacher_only: bool,
    #[arg(long, default_value = "lss-out")]
    output_dir: PathBuf,
}

fn simulate(args: &SimulateArgs) -> Result<bool, Error> {
    let cfg = resolve_config(args)?;
    let out = run_experiment(&cfg)?;
    let s = &out.summary;
    println!("lss {} config {}", s.version, s.config_digest);
    println!(
        "p={} n={} dist={} reps={} spikes={} ||Σ||={:.4}",
        cfg.p, cfg.n, cfg.dist, s.reps, s.model.spike_count, s.model.spectral_norm
    );
    println!(
        "E T1={:.6} E T2={:.6}  mean T1={:.6} mean T2={:.6}",
        s.moments.e_t1, s.moments.e_t2, s.empirical.mean_t1, s.empirical.mean_t2
    );
    println!("KS(TS, chi2_2) = {:.5}", s.ks);
    if let Some(c) = &s.centered {
        println!("KS(TS centered, chi2_2) = {:.5}", c.ks);
    }
    for note in &s.notes {
        println!("note: {note}");
    }
    for f in &out.files {
        println!("wrote {}", f.display());
    }
    Ok(true)
}

fn verify(args: &VerifyArgs) -> Result<bool, Error> {
    let pool = if args.rademacher_only {
        DistPool::RademacherOnly
    } else {
        DistPool::Mixed
    };
    let report = run_verification_suite(args.max_dim, args.cases, args.seed, pool)?;
    for (lemma, err) in &report.max_abs_err {
        println!("{lemma:<28} max abs_err {err:.3e}");
    }
    for (what, err) in &report.leading_order_max_abs_err {
        println!("{what:<28} max abs_err {err:.3e} (leading order, not gated)");
    }
    for f in &report.failures {
        eprintln!("FAIL {f}");
    }
    let path = write_verification(&report, &args.output_dir)?;
    println!("wrote {}", path.display());
    println!("{}", if report.passed { "PASS" } else { "FAIL" });
    Ok(report.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Verify(a) => verify(a),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Usage(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
