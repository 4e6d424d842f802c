fn main() {
    std::process::exit(metamorph_cli::cli::main_with(std::env::args_os()));
}
