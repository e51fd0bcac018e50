use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use filterlab::harness::{self, ExperimentConfig, RunOptions};

#[derive(Parser)]
#[command(name = "filterlab", version, about = "Run filtered-Liouvillian and spectral-flow experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON configuration.
    Run {
        config: PathBuf,
        /// Output directory for the CSV curve and JSON summary.
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Overrides the seed stored in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        threads: Option<usize>,
    },
}

// The system OpenBLAS picks broken eigensolver kernels on some AVX-512
// hosts; pin a known-good core type before any BLAS call.
#[cfg(unix)]
fn pin_blas_core() {
    use std::os::unix::process::CommandExt;
    const VAR: &str = "OPENBLAS_CORETYPE";
    if std::env::var_os(VAR).is_some() {
        return;
    }
    let Ok(exe) = std::env::current_exe() else { return };
    let err = std::process::Command::new(exe)
        .args(std::env::args_os().skip(1))
        .env(VAR, "SkylakeX")
        .exec();
    eprintln!("warning: could not re-execute with {VAR} set: {err}");
}

#[cfg(not(unix))]
fn pin_blas_core() {}

fn main() -> ExitCode {
    pin_blas_core();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let Command::Run {
        config,
        out,
        seed,
        threads,
    } = cli.command;
    let result = ExperimentConfig::from_path(&config).and_then(|cfg| {
        let opts = RunOptions {
            out_dir: out,
            seed,
            threads,
            stem: harness::default_stem(&config),
        };
        harness::run(&cfg, &opts)
    });
    match result {
        Ok(output) => {
            println!("wrote {}", output.csv_path.display());
            println!("wrote {}", output.summary_path.display());
            if let Some(fit) = &output.summary.fit {
                println!("fit: rate {:.6e}, r^2 {:.6}", fit.rate, fit.r_squared);
            }
            match output.summary.verdict {
                Some(v) if !v.holds => {
                    eprintln!("bound violated: min margin {:.6e}", v.min_margin);
                    ExitCode::from(4)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
