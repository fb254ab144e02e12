fn main() {
    std::process::exit(dynext::cli::main_with_args(std::env::args_os()));
}
