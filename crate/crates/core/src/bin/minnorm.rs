fn main() {
    std::process::exit(minnorm::cli::run(std::env::args_os()));
}
