use std::process::ExitCode;

fn main() -> ExitCode {
    metafix::run(std::env::args_os())
}
