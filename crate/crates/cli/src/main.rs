use clap::Parser;
use qsample_cli::config::Cli;

fn main() {
    let cli = Cli::parse();
    if let Err(e) = qsample_cli::run(cli) {
        eprintln!("qsample: {e}");
        std::process::exit(e.exit_code());
    }
}
