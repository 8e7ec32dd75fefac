fn main() {
    std::process::exit(scipip::cli::run(std::env::args_os()));
}
