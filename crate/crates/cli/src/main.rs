fn main() {
    std::process::exit(cma_cli::run(std::env::args_os()));
}
