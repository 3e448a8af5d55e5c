use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use liftlab::hitting::Family;
use liftlab_cli::*;

#[derive(Parser)]
#[command(
    name = "liftlab",
    version,
    about = "Query-to-communication lifting experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GadgetOpts {
    #[arg(long, value_enum, default_value = "ip")]
    gadget: GadgetKind,
    #[arg(long)]
    n: usize,
    /// Gap for gh, e.g. 1/4.
    #[arg(long)]
    gamma: Option<String>,
}

#[derive(Args)]
struct EngineOpts {
    /// Outer function as a JSON truth table.
    #[arg(long = "f")]
    f: PathBuf,
    #[arg(long, default_value = "1/4")]
    eps: String,
    #[arg(long, default_value_t = 16)]
    h: u32,
    #[arg(long, default_value = "1/8")]
    delta: String,
    /// Thickness threshold; defaults to 2^-h.
    #[arg(long)]
    tau: Option<String>,
    /// Average-thickness threshold; defaults to 4*2^(-eps*h).
    #[arg(long)]
    phi: Option<String>,
    #[arg(long, value_enum, default_value = "enumerate")]
    mode: ModeKind,
    #[arg(long, default_value_t = 1000)]
    max_attempts: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    check_invariants: bool,
    #[arg(long, value_enum, default_value = "on")]
    require_gain: Switch,
    #[arg(long)]
    strict: bool,
    /// Number type for thresholds.
    #[arg(long, value_enum, default_value = "exact")]
    scalar: ScalarKind,
}

impl EngineOpts {
    fn engine_args(&self) -> EngineArgs {
        EngineArgs {
            eps: self.eps.clone(),
            delta: self.delta.clone(),
            h: self.h,
            tau: self.tau.clone(),
            phi: self.phi.clone(),
            mode: self.mode,
            max_attempts: self.max_attempts,
            seed: self.seed,
            check_invariants: self.check_invariants,
            require_gain: self.require_gain == Switch::On,
            strict: self.strict,
            scalar: self.scalar,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo hitting rates of the monochromatic rectangle distributions.
    Hitting {
        #[command(flatten)]
        gadget: GadgetOpts,
        /// Rectangle value; both when omitted.
        #[arg(long)]
        c: Option<u8>,
        /// Test family; all when omitted.
        #[arg(long)]
        family: Option<Family>,
        /// Density exponent of the test sets.
        #[arg(long)]
        h: Option<u32>,
        #[arg(long, default_value_t = 10_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Exact gap-Hamming miss probability against the worst Hamming ball.
    GhWorstcase {
        #[arg(long)]
        n: usize,
        /// Density exponent of the ball, e.g. 0.99 or 99/100.
        #[arg(long, default_value = "99/100")]
        exponent: String,
    },
    /// Run the simulation on one input z.
    Simulate {
        #[command(flatten)]
        gadget: GadgetOpts,
        #[command(flatten)]
        engine: EngineOpts,
        #[arg(long)]
        z: String,
    },
    /// Extract the decision tree the simulation computes.
    Extract {
        #[command(flatten)]
        gadget: GadgetOpts,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Simulate every input and compare with f.
    Verify {
        #[command(flatten)]
        gadget: GadgetOpts,
        #[command(flatten)]
        engine: EngineOpts,
    },
    /// Exact subspace containment counts.
    SubspaceCheck {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
    },
}

fn gadget(opts: &GadgetOpts) -> Result<liftlab::Gadget> {
    build_gadget(opts.gadget, opts.n, opts.gamma.as_deref())
}

fn run(cli: &Cli) -> Result<Report> {
    match &cli.command {
        Command::Hitting {
            gadget: g,
            c,
            family,
            h,
            trials,
            seed,
        } => {
            let cs = match c {
                None => vec![false, true],
                Some(0) => vec![false],
                Some(1) => vec![true],
                Some(v) => bail!("--c must be 0 or 1, got {v}"),
            };
            let families = match family {
                Some(f) => vec![*f],
                None => vec![Family::Random, Family::Subcube, Family::Ball],
            };
            cmd_hitting(&gadget(g)?, &cs, &families, *h, *trials, *seed)
        }
        Command::GhWorstcase { n, exponent } => cmd_gh_worstcase(*n, exponent),
        Command::Simulate {
            gadget: g,
            engine,
            z,
        } => {
            let f = load_table(&engine.f)?;
            cmd_simulate(&f, gadget(g)?, &parse_bits(z)?, &engine.engine_args())
        }
        Command::Extract { gadget: g, engine } => {
            cmd_extract(&load_table(&engine.f)?, gadget(g)?, &engine.engine_args())
        }
        Command::Verify { gadget: g, engine } => {
            cmd_verify(&load_table(&engine.f)?, gadget(g)?, &engine.engine_args())
        }
        Command::SubspaceCheck { n, d } => cmd_subspace_check(*n, *d),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::write(path, &report.text),
        None => std::io::stdout().write_all(report.text.as_bytes()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
