fn main() {
    std::process::exit(tandem_cli::run(std::env::args_os()));
}
