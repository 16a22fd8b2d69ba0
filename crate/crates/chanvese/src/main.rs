fn main() {
    std::process::exit(chanvese::cli::run(std::env::args_os()));
}
