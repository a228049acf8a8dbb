fn main() {
    std::process::exit(snowvis::cli::main_with_args());
}
