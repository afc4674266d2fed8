fn main() {
    std::process::exit(drama::cli::run(std::env::args_os()));
}
