mod args;
mod commands;
mod run;

use std::process::ExitCode;

use clap::Parser;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).format_timestamp(None).init();

    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads / PCLE_THREADS must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    let threads = rayon::current_num_threads();

    let result = match cli.command {
        Command::Serve(a) => commands::serve(&a).map(|_| ExitCode::SUCCESS),
        Command::Replay(a) => run::replay(&a, threads).map(|o| {
            let out = o.record.command.clone().out_mut().map(|p| p.display().to_string()).unwrap_or_default();
            if o.mismatched.is_empty() {
                println!("replayed into {out}: {} outputs identical", o.record.outputs.len());
                ExitCode::SUCCESS
            } else {
                eprintln!("replay differs in {} outputs:", o.mismatched.len());
                for m in &o.mismatched {
                    eprintln!("  {m}");
                }
                ExitCode::FAILURE
            }
        }),
        command => run::execute(command, threads).map(|rec| {
            let mut c = rec.command.clone();
            let out = c.out_mut().map(|p| p.display().to_string()).unwrap_or_default();
            println!("wrote {} files to {out}", rec.outputs.len());
            ExitCode::SUCCESS
        }),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::FAILURE
    })
}
