use std::process::ExitCode;

fn main() -> ExitCode {
    defectrack::cli::main()
}
