fn main() {
    std::process::exit(wavemat::cli::main());
}
