use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rectflow::casefile::{parse_case_file, parse_case_str};
use rectflow::netmodel::NetworkCase;
use rectflow::pipeline::{compare_sweep, run_check, run_pipeline, Method, PipelineOptions};
use rectflow::report::{emit_check, emit_compare, emit_report, Format};
use rectflow::Error;

const EXIT_INPUT: u8 = 2;
const EXIT_SOLVER: u8 = 3;

#[derive(Parser)]
#[command(name = "rectflow", version, about = "Linearized AC power flow with residual certification")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CaseArgs {
    /// Case file (TOML); `-` reads standard input.
    case: PathBuf,
    /// Output format: table, csv or json.
    #[arg(long, default_value = "table", value_parser = parse_format)]
    format: Format,
}

#[derive(Args)]
struct SolveArgs {
    /// auto, general, noload, lossless, dc, bolognani or decoupled.
    #[arg(long, default_value = "auto", value_parser = parse_method)]
    method: Method,
    /// Solve with the lossless method even when its dominance conditions fail.
    #[arg(long)]
    override_conditions: bool,
    /// Keep shunt conductances on the right-hand side of the DC solve.
    #[arg(long)]
    dc_keep_gsh: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one case and certify the result.
    Solve {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Also run the Newton-Raphson oracle and report the deviation.
        #[arg(long)]
        oracle: bool,
        /// Report wall-clock time per stage (makes output nondeterministic).
        #[arg(long)]
        timings: bool,
    },
    /// Structural solvability diagnostics only.
    Check {
        #[command(flatten)]
        case: CaseArgs,
    },
    /// Linear estimate against the oracle over a list of loading factors.
    Compare {
        #[command(flatten)]
        case: CaseArgs,
        #[command(flatten)]
        solve: SolveArgs,
        /// Comma-separated loading factors, e.g. 1,0.5,0.25.
        #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
        alpha_list: Vec<f64>,
    },
}

fn parse_format(s: &str) -> Result<Format, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

fn load(path: &Path) -> rectflow::Result<NetworkCase> {
    if path.as_os_str() == "-" {
        let mut text = String::new();
        std::io::stdin()
            .read_to_string(&mut text)
            .map_err(|e| Error::Parse { line: 0, message: format!("cannot read standard input: {e}") })?;
        parse_case_str(&text)
    } else {
        parse_case_file(path)
    }
}

fn options(solve: &SolveArgs) -> PipelineOptions {
    PipelineOptions {
        method: solve.method,
        override_conditions: solve.override_conditions,
        dc_keep_gsh: solve.dc_keep_gsh,
        ..Default::default()
    }
}

fn run(cli: Cli) -> rectflow::Result<String> {
    match cli.command {
        Command::Solve { case, solve, oracle, timings } => {
            let network = load(&case.case)?;
            let opts = PipelineOptions { with_oracle: oracle, timings, ..options(&solve) };
            Ok(emit_report(&run_pipeline(&network, &opts)?, case.format))
        }
        Command::Check { case } => {
            let network = load(&case.case)?;
            Ok(emit_check(&run_check(&network), case.format))
        }
        Command::Compare { case, solve, alpha_list } => {
            let network = load(&case.case)?;
            Ok(emit_compare(&compare_sweep(&network, &alpha_list, &options(&solve))?, case.format))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(text) => {
            print!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::from(if e.is_input_error() { EXIT_INPUT } else { EXIT_SOLVER })
        }
    }
}
