use std::io::Write;
use std::process::ExitCode;

fn main() -> ExitCode {
    let exit = rateloss_tool::app::main_with(std::env::args_os());
    let _ = std::io::stdout().write_all(exit.stdout.as_bytes());
    let _ = std::io::stderr().write_all(exit.stderr.as_bytes());
    ExitCode::from(exit.code as u8)
}
