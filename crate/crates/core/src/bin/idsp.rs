use clap::Parser;

fn main() {
    let cli = idsp::cli::Cli::parse();
    if let Err(err) = idsp::cli::run(cli) {
        eprintln!("idsp: {err}");
        std::process::exit(err.exit_code());
    }
}
