use std::process::ExitCode;

fn main() -> ExitCode {
    wavecrit::cli::main_entry()
}
