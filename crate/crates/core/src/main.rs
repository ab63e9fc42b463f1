use std::process::ExitCode;

fn main() -> ExitCode {
    sasaa::cli::cli_main(std::env::args_os())
}
