fn main() {
    std::process::exit(qwmem::cli::run_cli(std::env::args_os()));
}
