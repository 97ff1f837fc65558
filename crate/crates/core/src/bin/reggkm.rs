fn main() {
    std::process::exit(reggkm::cli::run(std::env::args_os()));
}
