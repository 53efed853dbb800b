// SPDX-License-Identifier: Apache-2.0

use clap::Parser;

fn main() {
    let cli = sand_cli::Cli::parse();
    match sand_cli::run(&cli) {
        Ok(out) => {
            if !out.is_empty() {
                println!("{out}");
            }
        }
        Err(e) => {
            eprintln!("{}", e.line());
            std::process::exit(e.exit_code());
        }
    }
}
