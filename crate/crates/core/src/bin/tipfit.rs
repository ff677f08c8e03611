fn main() {
    std::process::exit(tipfit::cli::run(std::env::args_os()));
}
