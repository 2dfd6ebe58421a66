fn main() {
    std::process::exit(nlconsensus::cli::main_with_args(std::env::args_os()));
}
