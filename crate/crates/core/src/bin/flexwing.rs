use std::process::ExitCode;

fn main() -> ExitCode {
    flexwing_rl::harness::cli::main_with_args(std::env::args_os())
}
