use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(curvlab_cli::cli::main_with(std::env::args_os()) as u8)
}
