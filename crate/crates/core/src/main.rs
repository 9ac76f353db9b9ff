use std::process::ExitCode;

fn main() -> ExitCode {
    bandit_switch::cli::main_with_args(std::env::args_os())
}
