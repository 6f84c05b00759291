use clap::Parser;

fn main() {
    let cli = fracheat_cli::Cli::parse();
    std::process::exit(fracheat_cli::run(&cli));
}
