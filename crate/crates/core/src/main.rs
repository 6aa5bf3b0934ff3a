fn main() {
    std::process::exit(dualstark::cli::run(std::env::args_os()));
}
