fn main() {
    std::process::exit(riva_core::cli::main_from(std::env::args_os()));
}
