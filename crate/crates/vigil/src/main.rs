fn main() {
    std::process::exit(vigil::cli::run(std::env::args_os()));
}
