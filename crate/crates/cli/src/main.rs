fn main() {
    std::process::exit(gabmod_cli::main_with_args(std::env::args_os()));
}
