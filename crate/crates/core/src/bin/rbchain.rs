fn main() {
    std::process::exit(rbchain::cli::cli_main(std::env::args_os()));
}
