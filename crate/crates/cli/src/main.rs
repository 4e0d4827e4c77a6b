fn main() {
    std::process::exit(hashba_cli::run(std::env::args_os()));
}
