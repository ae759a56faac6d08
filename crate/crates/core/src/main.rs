fn main() {
    std::process::exit(wigner_lab::cli::run(std::env::args_os()));
}
