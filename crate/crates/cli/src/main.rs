fn main() {
    std::process::exit(pauliprop_cli::run_cli(std::env::args_os()));
}
