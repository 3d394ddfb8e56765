fn main() {
    std::process::exit(jumpfolio::cli::main_exit());
}
