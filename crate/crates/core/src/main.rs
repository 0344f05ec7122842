fn main() {
    std::process::exit(critshe::cli::run(std::env::args_os()));
}
