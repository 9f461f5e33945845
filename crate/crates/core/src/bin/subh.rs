fn main() {
    std::process::exit(subharmonic::cli::run(std::env::args().collect()));
}
