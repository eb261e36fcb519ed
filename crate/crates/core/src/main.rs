fn main() {
    std::process::exit(growth_core::cli::run(std::env::args_os()));
}
