use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(transmon_engine::cli::main_with_args(std::env::args_os()))
}
