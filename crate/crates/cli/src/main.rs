fn main() {
    std::process::exit(buildseg_cli::run_cli(std::env::args_os()));
}
