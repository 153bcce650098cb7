use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(clarion::cli::run_from(std::env::args()) as u8)
}
