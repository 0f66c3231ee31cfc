fn main() {
    std::process::exit(cewe_cli::run(std::env::args_os()));
}
