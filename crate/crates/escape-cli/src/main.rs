fn main() {
    std::process::exit(escape_cli::run(std::env::args_os()));
}
