fn main() {
    std::process::exit(pape::cli::main_with_args(std::env::args_os()));
}
