use clap::Parser;

fn main() {
    let cli = nadyn_cli::Cli::parse();
    if let Err(e) = nadyn_cli::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
