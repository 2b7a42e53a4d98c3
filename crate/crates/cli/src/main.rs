fn main() {
    std::process::exit(tvpsv_cli::main_with_args(std::env::args_os()));
}
