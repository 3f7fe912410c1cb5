fn main() {
    std::process::exit(csc_core::cli::run());
}
