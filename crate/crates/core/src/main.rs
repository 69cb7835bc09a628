fn main() {
    std::process::exit(schemasim::cli::main_with_args(std::env::args_os()));
}
