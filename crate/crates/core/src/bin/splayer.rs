fn main() {
    std::process::exit(splayer::cli::main_with_args(std::env::args_os()));
}
