fn main() {
    std::process::exit(dispersal_cli::run(std::env::args_os()));
}
