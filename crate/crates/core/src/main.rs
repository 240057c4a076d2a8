fn main() {
    std::process::exit(stmap::cli::main());
}
