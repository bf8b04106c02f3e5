fn main() {
    std::process::exit(compacton_lab::cli::main_with_args(std::env::args_os()));
}
