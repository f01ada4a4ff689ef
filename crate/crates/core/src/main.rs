fn main() {
    std::process::exit(pseudoplap::cli::run_cli(std::env::args_os()));
}
