fn main() {
    std::process::exit(ease_cli::run_cli(std::env::args_os()));
}
