fn main() {
    std::process::exit(epwind::cli::run(std::env::args_os()));
}
