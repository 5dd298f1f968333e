use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use heisenberg_ilg::cli_io::{self, Command, GenerateConfig, GenerateKind, Outcome, RunConfig};
use heisenberg_ilg::corona::DyadicInterval;

/// Intrinsic Lipschitz graphs in the Heisenberg group.
#[derive(Parser, Debug)]
#[command(name = "heis-ilg", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check the intrinsic Lipschitz and tameness conditions of a sampled map.
    Verify {
        #[arg(long)]
        input: PathBuf,
        /// Tame constants (and optional intrinsic bound) to check against.
        #[arg(long)]
        constants: Option<PathBuf>,
        /// Report path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Extend an intrinsic Lipschitz sample and audit the extension.
    Extend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        audit_grid: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Corona decomposition of a k = 1 intrinsic 1-Lipschitz curve.
    Corona {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.3)]
        eta: f64,
        /// Root interval as `j,m`.
        #[arg(long, default_value = "0,0", value_parser = parse_root)]
        root: DyadicInterval,
        #[arg(long, default_value_t = 8)]
        depth: u32,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic map.
    Generate {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        n: usize,
        /// Slope bound of the horizontal components (ilg-k1).
        #[arg(long = "lipschitz", default_value_t = 0.5)]
        lipschitz: f64,
        #[arg(long, default_value_t = 4)]
        breakpoints: usize,
        /// Domain interval `a,b` (ilg-k1) or box side `lo,hi` (tame-kn).
        #[arg(long, value_parser = parse_pair)]
        domain: Option<(f64, f64)>,
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        /// Number of samples (tame-kn).
        #[arg(long, default_value_t = 40)]
        points: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-sample approximation ratios of a corona run as CSV.
    Report {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        csv: PathBuf,
    },
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum Kind {
    IlgK1,
    TameKn,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected two comma-separated numbers")?;
    Ok((a.trim().parse().map_err(|e| format!("{e}"))?, b.trim().parse().map_err(|e| format!("{e}"))?))
}

fn parse_root(s: &str) -> Result<DyadicInterval, String> {
    let (j, m) = s.split_once(',').ok_or("expected j,m")?;
    Ok(DyadicInterval::new(
        j.trim().parse().map_err(|e| format!("{e}"))?,
        m.trim().parse().map_err(|e| format!("{e}"))?,
    ))
}

fn command(cmd: Cmd) -> Command {
    match cmd {
        Cmd::Verify { input, constants, out } => Command::Verify { input, constants, out },
        Cmd::Extend { input, audit_grid, out } => Command::Extend { input, audit_grid, out },
        Cmd::Corona { input, eta, root, depth, out } => Command::Corona { input, eta, root, depth, out },
        Cmd::Generate { kind, seed, n, lipschitz, breakpoints, domain, step, points, out } => {
            let kind = match kind {
                Kind::IlgK1 => GenerateKind::IlgK1,
                Kind::TameKn => GenerateKind::TameKn,
            };
            let default_domain = match kind {
                GenerateKind::IlgK1 => (-1.0, 2.0),
                GenerateKind::TameKn => (0.0, 1.0),
            };
            Command::Generate(GenerateConfig {
                kind,
                seed,
                n,
                lipschitz,
                breakpoints,
                domain: domain.unwrap_or(default_domain),
                step,
                points,
                out,
            })
        }
        Cmd::Report { input, csv } => Command::Report { input, csv },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli_io::tolerance_scale() {
        Ok(tolerance_scale) => cli_io::run(&RunConfig { command: command(cli.command), tolerance_scale }),
        Err(e) => Outcome::input_error(&e),
    };
    if outcome.code == 0 {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
