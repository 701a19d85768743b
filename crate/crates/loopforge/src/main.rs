use std::process::ExitCode;

fn main() -> ExitCode {
    let code = loopforge::cli::run_cli(std::env::args_os());
    ExitCode::from(code as u8)
}
