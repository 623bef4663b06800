use std::process::ExitCode;

fn main() -> ExitCode {
    frobenius_cli::run(std::env::args_os())
}
