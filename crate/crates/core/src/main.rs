fn main() {
    std::process::exit(vqe_core::cli::run_from_args(std::env::args_os()));
}
