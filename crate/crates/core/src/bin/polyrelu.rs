fn main() {
    std::process::exit(polyrelu::cli::cli(std::env::args_os()));
}
