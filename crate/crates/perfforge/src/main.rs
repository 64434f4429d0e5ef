fn main() {
    std::process::exit(perfforge::cli::main());
}
