fn main() {
    std::process::exit(cgokit::cli::run(std::env::args_os()));
}
