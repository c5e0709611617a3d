use std::process::ExitCode;

fn main() -> ExitCode {
    diarygan::cli::main_with_args(std::env::args_os())
}
