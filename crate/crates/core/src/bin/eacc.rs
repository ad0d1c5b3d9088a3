fn main() {
    std::process::exit(eacc_lab::cli::main());
}
