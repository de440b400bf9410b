fn main() {
    std::process::exit(warpcost::cli::run(std::env::args_os()));
}
