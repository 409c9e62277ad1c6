fn main() {
    std::process::exit(immunofilter::cli::run(std::env::args_os()));
}
