fn main() {
    std::process::exit(softhad::cli::run(std::env::args_os()));
}
