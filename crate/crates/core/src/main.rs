fn main() {
    std::process::exit(spams_core::cli::run(std::env::args_os()));
}
