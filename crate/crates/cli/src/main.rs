use std::panic;
use std::process::ExitCode;

fn main() -> ExitCode {
    match panic::catch_unwind(|| errstat::run(std::env::args_os())) {
        Ok(code) => ExitCode::from(code as u8),
        // The panic message has already been printed by the hook.
        Err(_) => ExitCode::from(1),
    }
}
