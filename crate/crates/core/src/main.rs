fn main() {
    std::process::exit(gpz::cli::run(std::env::args_os()));
}
