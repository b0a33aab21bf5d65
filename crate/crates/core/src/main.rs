use clap::Parser;

fn main() {
    let cli = ou_harvest::cli::Cli::parse();
    std::process::exit(ou_harvest::cli::run(&cli));
}
