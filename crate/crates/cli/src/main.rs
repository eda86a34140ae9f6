use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(ssanova_cli::run(std::env::args_os()))
}
