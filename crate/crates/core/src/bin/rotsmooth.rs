fn main() {
    std::process::exit(rotsmooth::cli::run(std::env::args_os()));
}
