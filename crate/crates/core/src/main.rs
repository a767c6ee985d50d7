use clap::Parser;
use photonkin::cli::{main_with, Args};

fn main() {
    let args = Args::parse();
    std::process::exit(main_with(&args) as i32);
}
