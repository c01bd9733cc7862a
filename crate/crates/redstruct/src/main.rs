fn main() {
    std::process::exit(redstruct::cli::main());
}
