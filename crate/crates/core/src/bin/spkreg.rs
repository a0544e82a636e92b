fn main() {
    std::process::exit(spkreg::cli::run(std::env::args_os()));
}
