use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use nesy_dcsp::cli::{self, Cli};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Cli::parse();
    let out = match cli::run(&args) {
        Ok(out) => out,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    for (path, contents) in &out.files {
        if let Err(e) = std::fs::write(path, contents) {
            eprintln!("error: writing {}: {e}", path.display());
            return ExitCode::from(1);
        }
    }
    let manifest = match out.manifest.to_json() {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &args.manifest {
        Some(path) => {
            if let Err(e) = std::fs::write(path, &manifest) {
                eprintln!("error: writing {}: {e}", path.display());
                return ExitCode::from(1);
            }
        }
        None => eprint!("{manifest}"),
    }
    for d in &out.diagnostics {
        eprintln!("warning: {d}");
    }
    let mut stdout = std::io::stdout().lock();
    if stdout.write_all(out.stdout.as_bytes()).and_then(|_| stdout.flush()).is_err() {
        return ExitCode::from(1);
    }
    ExitCode::from(out.status.exit_code() as u8)
}
