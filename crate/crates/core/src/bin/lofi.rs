fn main() {
    std::process::exit(lofi::cli::main_with_args(std::env::args_os()));
}
