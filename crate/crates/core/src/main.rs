fn main() {
    std::process::exit(delayed_maxwell::cli::main_with_args(std::env::args_os()));
}
