fn main() {
    std::process::exit(npqc::cli::run(std::env::args_os()));
}
