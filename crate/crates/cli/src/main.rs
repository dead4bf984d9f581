fn main() {
    std::process::exit(delaykit_cli::app::main_with_args(std::env::args_os()));
}
