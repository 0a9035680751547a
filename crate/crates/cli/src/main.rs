use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use evoinc_cli::config::ModeName;
use evoinc_cli::{load, run, suites, CliError, CliResult, Overrides};

/// Solver for second-order evolution inclusions `u'' + dPsi(u') + B(t, u) = f`.
///
/// Log verbosity is read from `EVOINC_LOG` (error, warn, info, debug, trace).
#[derive(Parser)]
#[command(name = "evoinc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one or more experiments; several configs run concurrently.
    Solve {
        #[arg(required = true)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Run a built-in verification suite.
    Suite {
        /// One of: prox_oracle, manufactured, contraction, stability, blowup.
        name: String,
    },
    /// Parse and check a config without solving.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

#[derive(Args, Clone)]
struct OverrideArgs {
    #[arg(long)]
    n_steps: Option<usize>,
    /// Picard tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    /// Output directory; with several configs each gets a subdirectory named after its file.
    #[arg(long)]
    out: Option<PathBuf>,
}

impl OverrideArgs {
    fn for_config(&self, path: &std::path::Path, many: bool) -> Overrides {
        let out = self.out.as_ref().map(|dir| {
            if many {
                dir.join(path.file_stem().unwrap_or_default())
            } else {
                dir.clone()
            }
        });
        Overrides {
            n_steps: self.n_steps,
            tol: self.tol,
            mode: self.mode,
            out,
        }
    }
}

fn solve_one(path: &std::path::Path, overrides: &Overrides) -> CliResult<()> {
    let exp = load(path, overrides)?;
    let outcome = run(&exp)?;
    print!("{}", outcome.summary);
    outcome.into_result()
}

fn report(path: Option<&std::path::Path>, e: &CliError) -> u8 {
    match path {
        Some(p) => eprintln!("{}: {e}", p.display()),
        None => eprintln!("{e}"),
    }
    e.exit_code()
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("EVOINC_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 64 } else { 0 });
        }
    };
    let code = match cli.command {
        Command::Solve { configs, overrides } => {
            let many = configs.len() > 1;
            let codes: Vec<u8> = std::thread::scope(|scope| {
                let handles: Vec<_> = configs
                    .iter()
                    .map(|path| {
                        let o = overrides.for_config(path, many);
                        scope.spawn(move || solve_one(path, &o).err().map_or(0, |e| report(Some(path), &e)))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().unwrap_or(1)).collect()
            });
            codes.into_iter().max().unwrap_or(0)
        }
        Command::Suite { name } => match suites::run_suite(&name) {
            Ok(rows) => {
                println!("{}", suites::header());
                for row in &rows {
                    println!("{row}");
                }
                if rows.iter().all(|r| r.pass) {
                    0
                } else {
                    report(None, &CliError::SuiteFailed(name))
                }
            }
            Err(e) => report(None, &e),
        },
        Command::Validate { config, overrides } => match load(&config, &overrides.for_config(&config, false)) {
            Ok(exp) => {
                println!(
                    "{}: ok (dim {}, horizon {}, {} steps)",
                    config.display(),
                    exp.spec.dim(),
                    exp.spec.horizon,
                    exp.cfg.n_steps
                );
                0
            }
            Err(e) => report(Some(&config), &e),
        },
    };
    ExitCode::from(code)
}
