fn main() {
    std::process::exit(maxplus::cli::run(std::env::args_os()));
}
