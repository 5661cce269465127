use clap::Parser;

fn main() {
    let cli = boltrom::cli::Cli::parse();
    std::process::exit(boltrom::cli::run(cli));
}
