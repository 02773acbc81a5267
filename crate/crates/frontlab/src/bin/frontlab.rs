fn main() {
    std::process::exit(frontlab::cli::run_command(std::env::args_os()));
}
