fn main() {
    std::process::exit(tlsan::cli::run(std::env::args_os()));
}
