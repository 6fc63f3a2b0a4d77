fn main() {
    std::process::exit(polydepth::cli::run(std::env::args_os()));
}
