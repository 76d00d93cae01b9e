fn main() {
    std::process::exit(moikit::cli::run(std::env::args_os()));
}
