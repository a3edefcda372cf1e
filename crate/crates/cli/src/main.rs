fn main() {
    std::process::exit(kcsr_cli::run_cli(std::env::args_os()));
}
