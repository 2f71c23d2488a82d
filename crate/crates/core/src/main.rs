use clap::Parser;
use srlinksim::cli::{execute, Cli};

fn main() {
    std::process::exit(execute(Cli::parse()));
}
