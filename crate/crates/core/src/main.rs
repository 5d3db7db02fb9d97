fn main() {
    std::process::exit(dslt_core::cli::main_with_args(std::env::args_os()));
}
