fn main() {
    std::process::exit(seccloud::cli::run_from_env());
}
