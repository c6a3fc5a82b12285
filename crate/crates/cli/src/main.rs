use clap::Parser;

fn main() {
    let cli = pbe_cli::Cli::parse();
    std::process::exit(pbe_cli::run(&cli));
}
