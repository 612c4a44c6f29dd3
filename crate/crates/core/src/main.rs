fn main() {
    std::process::exit(rloc::cli::run(std::env::args_os()));
}
