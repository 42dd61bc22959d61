fn main() {
    std::process::exit(nvreadout::cli::main_with_args(std::env::args_os()));
}
