use std::process::ExitCode;

fn main() -> ExitCode {
    conflict_gate::cli::main()
}
