fn main() {
    std::process::exit(kenv_cli::run(std::env::args_os()));
}
