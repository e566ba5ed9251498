fn main() {
    std::process::exit(advqa::cli::run(std::env::args_os()));
}
