use std::process::ExitCode;

fn main() -> ExitCode {
    ifslab_cli::run(std::env::args_os())
}
