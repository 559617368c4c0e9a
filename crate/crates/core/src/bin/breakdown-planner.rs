use std::process::ExitCode;

fn main() -> ExitCode {
    breakdown_planner::cli::main_with_args(std::env::args_os())
}
