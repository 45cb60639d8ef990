fn main() {
    std::process::exit(gsqg_cli::run(std::env::args_os()));
}
