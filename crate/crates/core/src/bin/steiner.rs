fn main() {
    std::process::exit(steiner_core::cli::run_cli(std::env::args_os()));
}
