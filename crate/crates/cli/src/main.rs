use std::io::Write;
use std::process::ExitCode;

use collective_chsh_cli::{configure_threads, run_from_args};

fn main() -> ExitCode {
    configure_threads();
    let outcome = run_from_args(std::env::args_os());
    // Ignore broken pipes; the exit code still reports the run.
    let _ = std::io::stdout().write_all(outcome.stdout.as_bytes());
    let _ = std::io::stderr().write_all(outcome.stderr.as_bytes());
    ExitCode::from(outcome.code as u8)
}
