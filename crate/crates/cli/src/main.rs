use clap::Parser;

fn main() {
    let cli = mmfs_cli::Cli::parse();
    std::process::exit(mmfs_cli::run(&cli));
}
