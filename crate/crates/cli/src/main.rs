use clap::Parser;

fn main() {
    let cli = geomix_cli::Cli::parse();
    if let Err(e) = geomix_cli::run(&cli) {
        eprintln!("geomix {}: {e}", cli.command.name());
        std::process::exit(e.exit_code());
    }
}
