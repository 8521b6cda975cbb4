use clap::Parser;

fn main() {
    let cli = convd::cli::Cli::parse();
    std::process::exit(convd::cli::run(&cli));
}
