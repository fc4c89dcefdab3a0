fn main() {
    std::process::exit(raicc::cli::run(std::env::args_os()));
}
