use clap::Parser;

fn main() {
    let cli = betatrack::cli::Cli::parse();
    if let Err(e) = betatrack::cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
