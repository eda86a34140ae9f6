//! Command-line front end: `fit`, `test`, `ci`, `simulate` and `generate`.
//!
//! Exit codes: 0 on success, 2 for usage, input or specification errors,
//! 3 for numerical failures.

pub mod commands;
pub mod config;
pub mod output;

use clap::Parser;

pub use config::{Cli, RunConfig};

pub const EXIT_USER: u8 = 2;
pub const EXIT_NUMERICAL: u8 = 3;

/// Exit code for an error raised while running a command.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<ssanova::Error>() {
        Some(e) if e.is_numerical() => EXIT_NUMERICAL,
        _ => EXIT_USER,
    }
}

fn run_config(config: RunConfig) -> anyhow::Result<()> {
    // Parallelism is over effects and replicates only, so output does not
    // depend on the thread count.
    faer::set_global_parallelism(faer::Par::Seq);
    let pool = rayon::ThreadPoolBuilder::new().num_threads(config.jobs).build()?;
    pool.install(|| commands::dispatch(config))
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USER } else { 0 };
        }
    };
    let result = RunConfig::from_cli(&cli).and_then(run_config);
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e:#}");
            exit_code(&e)
        }
    }
}
