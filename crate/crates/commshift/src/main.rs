fn main() {
    std::process::exit(commshift::cli::run(std::env::args_os()));
}
