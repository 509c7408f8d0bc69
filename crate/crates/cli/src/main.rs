use std::process::ExitCode;

fn main() -> ExitCode {
    alertroute_cli::main_with(std::env::args_os())
}
