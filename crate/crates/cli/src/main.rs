use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(mtcover_cli::app::run_cli(std::env::args_os()))
}
