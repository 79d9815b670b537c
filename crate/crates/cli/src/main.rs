use std::process::ExitCode;

fn main() -> ExitCode {
    sparsefeas_cli::main_with_args(std::env::args_os().collect())
}
