fn main() {
    std::process::exit(qplate::cli::main_with(std::env::args_os()));
}
