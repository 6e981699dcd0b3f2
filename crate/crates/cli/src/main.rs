use clap::Parser;

fn main() -> anyhow::Result<()> {
    let cli = rbd_cli::Cli::parse();
    rbd_cli::run(cli, &mut std::io::stdout().lock(), &mut std::io::stderr())
}
