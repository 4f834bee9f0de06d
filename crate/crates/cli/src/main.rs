use std::process::ExitCode;

use waveholtz_cli::{execute, init_threads, parse_args, CliError};

fn main() -> ExitCode {
    let inv = match parse_args(std::env::args_os()) {
        Ok(inv) => inv,
        Err(Ok(clap_err)) => {
            let code = if clap_err.use_stderr() { 1 } else { 0 };
            let _ = clap_err.print();
            return ExitCode::from(code);
        }
        Err(Err(e)) => return fail(&e),
    };
    if let Err(e) = init_threads() {
        return fail(&e);
    }
    match execute(&inv) {
        Ok((outcome, paths, checks)) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for p in &paths {
                println!("wrote {}", p.display());
            }
            for c in &checks {
                println!("{c}");
            }
            let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.to_string()).collect();
            if failed.is_empty() {
                ExitCode::SUCCESS
            } else {
                fail(&CliError::Check(failed))
            }
        }
        Err(e) => fail(&e),
    }
}

fn fail(e: &CliError) -> ExitCode {
    eprintln!("waveholtz: {e}");
    ExitCode::from(e.exit_code() as u8)
}
