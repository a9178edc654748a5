use clap::Parser;

fn main() {
    let cli = dart2_cli::Cli::parse();
    if let Err(e) = dart2_cli::run(cli) {
        eprintln!("error: {e}");
        if let dart2_cli::CliError::Core(dart2::Error::InvalidTree(violations)) = &e {
            for v in violations {
                eprintln!("  {v}");
            }
        }
        std::process::exit(e.exit_code());
    }
}
