use std::process::ExitCode;

fn main() -> ExitCode {
    hopf_cli::run(std::env::args_os())
}
