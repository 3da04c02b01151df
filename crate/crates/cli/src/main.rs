use clap::Parser;

use pursuit_cli::args::Cli;
use pursuit_cli::commands;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(e) = commands::run(&cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
