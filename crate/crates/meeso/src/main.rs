fn main() {
    std::process::exit(meeso::cli::run());
}
