fn main() {
    std::process::exit(pcrp::cli::run());
}
