use clap::Parser;

fn main() {
    let cli = adacvar_cli::Cli::parse();
    if let Err(e) = adacvar_cli::run(&cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
