use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use kmte_cli::{run, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    match run(cli, &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let report = serde_json::to_string(&e.report()).expect("error report serializes");
            let _ = writeln!(stdout, "{report}");
            ExitCode::from(e.exit_code())
        }
    }
}
