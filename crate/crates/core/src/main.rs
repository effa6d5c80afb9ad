fn main() {
    std::process::exit(nlpvq::cli::run(std::env::args_os()));
}
