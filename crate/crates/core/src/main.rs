fn main() {
    std::process::exit(sparse_rip::cli::run(std::env::args_os()));
}
