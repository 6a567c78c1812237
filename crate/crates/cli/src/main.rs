fn main() {
    std::process::exit(cropsig_cli::run(std::env::args_os()));
}
