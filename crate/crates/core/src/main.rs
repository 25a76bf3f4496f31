use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use fkv::cli::{execute, parse_config, Mode, Overrides};

/// Fractional Kelvin-Voigt solver and verification studies.
#[derive(Parser)]
#[command(version)]
struct Args {
    /// TOML run configuration.
    config: PathBuf,
    /// RUN, SWEEP, CONVERGENCE, UNIQUENESS or POSITIVITY; overrides the config.
    #[arg(long)]
    mode: Option<String>,
    /// Output directory; overrides FKV_OUT_DIR and the config.
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Worker threads for parallel runs.
    #[arg(long)]
    workers: Option<usize>,
    /// Seed for permutations and random test paths.
    #[arg(long)]
    seed: Option<u64>,
    /// Reject unknown config keys (default).
    #[arg(long, overrides_with = "no_strict")]
    strict: bool,
    /// Warn about unknown config keys instead of rejecting them.
    #[arg(long = "no-strict")]
    no_strict: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let mode = match args.mode.as_deref().map(|m| (m, Mode::parse(m))) {
        None => None,
        Some((_, Some(m))) => Some(m),
        Some((m, None)) => {
            eprintln!("error: unknown mode `{m}`");
            return ExitCode::from(2);
        }
    };
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {}: {e}", args.config.display());
            return ExitCode::from(2);
        }
    };
    let base = args.config.parent().map(PathBuf::from).unwrap_or_default();
    let cfg = match parse_config(&text, &base, mode, !args.no_strict) {
        Ok(c) => c,
        Err(errors) => {
            for e in errors {
                eprintln!("config error: {e}");
            }
            return ExitCode::from(2);
        }
    };
    for w in &cfg.warnings {
        eprintln!("warning: {w}");
    }
    let overrides = Overrides {
        out_dir: args.out_dir,
        seed: args.seed,
    };
    let pool = match rayon::ThreadPoolBuilder::new()
        .num_threads(args.workers.unwrap_or(0))
        .build()
    {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start workers: {e}");
            return ExitCode::from(3);
        }
    };
    match pool.install(|| execute(&cfg, &text, &base, &overrides)) {
        Ok(outcome) => {
            for c in &outcome.checks {
                println!(
                    "{} {} = {:.3e} (threshold {:.1e})",
                    if c.pass { "PASS" } else { "FAIL" },
                    c.name,
                    c.value,
                    c.threshold
                );
            }
            println!("outputs in {}", outcome.out_dir.display());
            if outcome.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
