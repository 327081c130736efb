use std::process::ExitCode;

fn main() -> ExitCode {
    env_logger::init();
    ExitCode::from(spectral_pgo::cli::main_with_args(std::env::args()) as u8)
}
