use clap::Parser;

use nroy_cli::commands::{run, Cli};

fn main() {
    // clap exits with code 2 on usage errors by itself
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}
