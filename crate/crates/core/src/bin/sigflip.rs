fn main() {
    std::process::exit(sigflip::cli::run(std::env::args_os()));
}
