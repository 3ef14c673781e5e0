fn main() {
    std::process::exit(geosplit::cli::run(std::env::args_os()));
}
