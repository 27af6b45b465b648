fn main() {
    std::process::exit(quipmc::cli::main_with_args(std::env::args_os()));
}
