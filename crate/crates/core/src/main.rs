fn main() {
    std::process::exit(diffsub::cli::run(std::env::args_os()));
}
