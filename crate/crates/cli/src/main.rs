use clap::Parser;

fn main() {
    let cli = hdlforge_cli::Cli::parse();
    std::process::exit(hdlforge_cli::execute(&cli));
}
