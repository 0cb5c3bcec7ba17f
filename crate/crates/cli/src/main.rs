fn main() {
    std::process::exit(normaudit_cli::run_from_args(std::env::args_os()));
}
