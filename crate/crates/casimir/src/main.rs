use clap::Parser;

use casimir::cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            for p in paths {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            // Single machine-parsable line: code then human-readable message.
            let msg = e.to_string().replace('\n', " ");
            eprintln!("error {}: {msg}", e.code());
            std::process::exit(1);
        }
    }
}
