fn main() {
    std::process::exit(apbf::cli::run());
}
