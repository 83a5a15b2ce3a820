fn main() {
    std::process::exit(arcpursuit::cli::run(std::env::args().collect()));
}
