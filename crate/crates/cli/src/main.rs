use clap::Parser;

fn main() {
    // clap exits with 2 on malformed command lines, matching config errors.
    let cli = rho1d_cli::Cli::parse();
    let code = rho1d_cli::run(cli, &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
