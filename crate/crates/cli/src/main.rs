fn main() {
    std::process::exit(shellvk_cli::run(std::env::args_os()));
}
