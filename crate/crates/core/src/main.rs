use clap::Parser;

fn main() {
    let args = margin_forge::cli::Args::parse();
    std::process::exit(margin_forge::cli::run(&args));
}
