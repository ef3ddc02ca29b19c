use clap::Parser;
use lrshield_cli::{error_json, exit_code, run, validate, Cli, Command};

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("LRSHIELD_LOG", "info")).init();
    if let Some(j) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(j.max(1)).build_global() {
            log::warn!("cannot size the worker pool: {e}");
        }
    }
    if cli.command == Command::Validate {
        match validate(&cli) {
            Ok(diags) => {
                println!("{}", serde_json::to_string_pretty(&diags).expect("diagnostics serialize"));
                for d in &diags {
                    eprintln!("{d}");
                }
                std::process::exit(if diags.is_empty() { 0 } else { 1 });
            }
            Err(e) => {
                eprintln!("{}", error_json("validate", &e));
                std::process::exit(exit_code(&e));
            }
        }
    }
    if let Err(e) = run(&cli) {
        eprintln!("{}", error_json(cli.command.name(), &e));
        std::process::exit(exit_code(&e));
    }
}
