fn main() {
    std::process::exit(gecmeta::cli::run());
}
