use clap::Parser;

use perishable_dynaq::cli::{self, Cli};

fn main() {
    if let Err(e) = cli::run(Cli::parse()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
