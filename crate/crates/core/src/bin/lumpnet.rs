fn main() {
    std::process::exit(lumpnet::cli::run(std::env::args_os()));
}
