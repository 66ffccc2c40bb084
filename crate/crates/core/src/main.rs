fn main() {
    std::process::exit(bglrf::cli::run());
}
