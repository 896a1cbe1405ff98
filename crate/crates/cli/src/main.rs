fn main() {
    std::process::exit(itl_cli::run(std::env::args_os().collect()));
}
