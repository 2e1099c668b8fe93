use clap::Parser;

fn main() {
    let cli = uiforge_cli::Cli::parse();
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let code = uiforge_cli::run(cli, &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(code);
}
