use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pssa_cli::ablate::{run_ablate, AblateSpec, DEFAULT_A, DEFAULT_B};
use pssa_cli::bench::{resolve_task, run_bench, BenchSpec, Overrides};
use pssa_cli::error::CliError;
use pssa_cli::replay::replay;
use pssa_cli::verify::{run_suite, Suite};
use pssa_core::filters::Method;
use pssa_core::metrics::csv_header;
use pssa_core::simulator::{preset_names, scripted_scenarios};

#[derive(Parser)]
#[command(name = "pssa", version, about = "Safe control benchmarks for multi-constraint robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one task under one method for one or more seeds.
    Bench(BenchArgs),
    /// Sweep the r-SSA slack weight over a * 10^b and compare with p-SSA.
    Ablate(AblateArgs),
    /// Run oracle checks; all suites when none is named.
    Verify {
        #[arg(value_parser = ["jacobian", "qp", "conflict", "metrics"])]
        suites: Vec<String>,
    },
    /// Rerun the command recorded in a manifest.
    Replay {
        manifest: PathBuf,
        /// Output directory; defaults to the recorded one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List presets and scripted scenarios.
    List,
}

#[derive(Args)]
struct BenchArgs {
    /// Preset, scripted scenario, or scenario JSON file.
    #[arg(long)]
    task: String,
    #[arg(long, value_parser = ["ssa", "rssa", "pssa"])]
    method: String,
    /// Seeds, comma separated or repeated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seed: Vec<u64>,
    #[arg(long)]
    steps: Option<usize>,
    /// Slack weight scale; defaults to 10 for rssa and 1 for pssa.
    #[arg(long)]
    qs_scale: Option<f64>,
    /// Slack norm order.
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..=2))]
    p: Option<u32>,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
    /// Write the QPs of infeasible steps under each seed directory.
    #[arg(long)]
    dump_qp: bool,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long)]
    task: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    steps: Option<usize>,
    /// Mantissas a of the grid.
    #[arg(long, value_delimiter = ',')]
    a: Vec<u32>,
    /// Exponents b of the grid.
    #[arg(long, value_delimiter = ',')]
    b: Vec<u32>,
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u32).range(1..=2))]
    p: u32,
    #[arg(long, default_value = "runs")]
    out: PathBuf,
}

fn bench(args: BenchArgs) -> Result<(), CliError> {
    let method: Method = args.method.parse().map_err(CliError::Config)?;
    let spec = BenchSpec {
        task: resolve_task(&args.task)?,
        method,
        seeds: args.seed,
        overrides: Overrides {
            steps: args.steps,
            qs_scale: args.qs_scale,
            p: args.p,
        },
        out: args.out,
        dump_qp: args.dump_qp,
    };
    let outcomes = run_bench(&spec)?;
    println!("{}", csv_header());
    for o in &outcomes {
        println!("{}", o.csv_row);
    }
    for o in &outcomes {
        eprintln!("wrote {}", o.dir.display());
    }
    Ok(())
}

fn ablate(args: AblateArgs) -> Result<(), CliError> {
    let spec = AblateSpec {
        task: resolve_task(&args.task)?,
        seed: args.seed,
        steps: args.steps,
        a: if args.a.is_empty() { DEFAULT_A.to_vec() } else { args.a },
        b: if args.b.is_empty() { DEFAULT_B.to_vec() } else { args.b },
        p: args.p,
        out: args.out,
    };
    let outcome = run_ablate(&spec)?;
    println!("label,J_arm,C_env,on_front");
    for (i, cell) in outcome.cells.iter().enumerate() {
        if let Some(pt) = cell.point() {
            let c = pt.c.map_or("null".to_string(), |c| format!("{c:.6}"));
            println!("{},{:.6},{c},{}", pt.label, pt.j, outcome.front.contains(&i));
        }
    }
    eprintln!("wrote {}", outcome.dir.display());
    Ok(())
}

fn verify(names: Vec<String>) -> Result<(), CliError> {
    let suites: Vec<Suite> = if names.is_empty() {
        Suite::ALL.to_vec()
    } else {
        names.iter().map(|s| s.parse()).collect::<Result<_, _>>()?
    };
    let (mut failed, mut total) = (0, 0);
    for suite in suites {
        println!("[{}]", suite.name());
        for check in run_suite(suite)? {
            total += 1;
            failed += usize::from(!check.passed());
            println!("{check}");
        }
    }
    if failed > 0 {
        return Err(CliError::ChecksFailed { failed, total });
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Bench(args) => bench(args),
        Command::Ablate(args) => ablate(args),
        Command::Verify { suites } => verify(suites),
        Command::Replay { manifest, out } => {
            let outcome = replay(&manifest, out.as_deref())?;
            match outcome.compared {
                Some(p) => println!("reproduced {}", p.display()),
                None => println!("wrote {} (no recorded output to compare)", outcome.dir.display()),
            }
            Ok(())
        }
        Command::List => {
            println!("presets:");
            for name in preset_names() {
                println!("  {name}");
            }
            println!("scripted scenarios:");
            for sc in scripted_scenarios() {
                println!("  {}: {}", sc.name, sc.expected);
            }
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
