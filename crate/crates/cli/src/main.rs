fn main() {
    std::process::exit(sparse_ippmm_cli::run_cli(std::env::args_os()));
}
