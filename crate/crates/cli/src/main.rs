mod args;
mod commands;
mod error;
mod manifest;

use clap::error::ErrorKind;
use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::GenTypes(a) => commands::gen_types(a),
        Command::Annotate(a) => commands::annotate(a),
        Command::Embed(a) => commands::embed(a),
        Command::Train(a) => commands::train_cmd(a),
        Command::Eval(a) => commands::eval_cmd(a),
        Command::Diagnose(a) => commands::diagnose(a),
        Command::Corrupt(a) => commands::corrupt_cmd(a),
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = run(cli) {
        eprintln!("ghgrl: {e}");
        std::process::exit(e.exit_code());
    }
}
