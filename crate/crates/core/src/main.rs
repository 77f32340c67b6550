fn main() {
    std::process::exit(hh_sliding::cli::main_with_args(std::env::args_os()));
}
