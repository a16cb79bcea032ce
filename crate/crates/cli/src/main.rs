use clap::Parser;

fn main() {
    let cli = gvarsv::Cli::parse();
    if let Err(e) = gvarsv::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
