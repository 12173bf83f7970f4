fn main() {
    std::process::exit(rupnet::cli::run());
}
