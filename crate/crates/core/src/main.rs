fn main() {
    std::process::exit(twostream::cli::main());
}
