fn main() {
    std::process::exit(hetop_cli::run_cli(std::env::args_os()));
}
