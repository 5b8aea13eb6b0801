//! `isingpf`: enumerate, estimate, sweep, ga-search, embed.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage or input
//! errors. Every run writes a manifest next to its outputs; `replay`
//! re-runs one.

mod args;
mod commands;
mod output;

use clap::Parser;

use args::{Cli, Command};
use output::{read_manifest, CliError, CliResult};

fn dispatch(command: &Command, args: &[String]) -> CliResult<()> {
    match command {
        Command::Enumerate(a) => commands::enumerate(a, args),
        Command::Estimate(a) => commands::estimate(a, args),
        Command::Sweep(a) => commands::sweep(a, args),
        Command::GaSearch(a) => commands::ga_search(a, args),
        Command::Embed(a) => commands::embed(a, args),
        Command::Replay(a) => {
            let manifest = read_manifest(&a.manifest)?;
            let argv = std::iter::once("isingpf".to_string()).chain(manifest.args.iter().cloned());
            let cli = Cli::try_parse_from(argv)
                .map_err(|e| CliError::Usage(format!("manifest arguments do not parse: {e}")))?;
            if matches!(cli.command, Command::Replay(_)) {
                return Err(CliError::Usage("a manifest cannot record a replay".into()));
            }
            dispatch(&cli.command, &manifest.args)
        }
    }
}

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let code = match Cli::try_parse_from(&argv) {
        Ok(cli) => match dispatch(&cli.command, &argv[1..]) {
            Ok(()) => 0,
            Err(e) => {
                eprintln!("error: {e}");
                e.exit_code()
            }
        },
        Err(e) => {
            let _ = e.print();
            e.exit_code()
        }
    };
    std::process::exit(code);
}
