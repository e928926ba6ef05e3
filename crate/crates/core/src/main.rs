fn main() {
    std::process::exit(pfformer::cli::run(std::env::args().collect()));
}
