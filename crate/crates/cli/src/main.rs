mod cli;
mod commands;
mod exit;
mod provenance;

use clap::Parser;

fn main() {
    let cli = match cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            std::process::exit(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit::code_for(&err));
    }
}
