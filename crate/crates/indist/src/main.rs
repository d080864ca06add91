use clap::Parser;
use indist::Cli;

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let cli = Cli::parse();
    match indist::run(cli, &argv) {
        Ok(summary) => print!("{summary}"),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
