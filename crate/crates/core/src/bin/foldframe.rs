fn main() {
    std::process::exit(foldframe::cli::run(std::env::args_os()));
}
