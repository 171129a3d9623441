fn main() {
    std::process::exit(levydd::cli::run(std::env::args_os()));
}
