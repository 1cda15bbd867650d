fn main() {
    std::process::exit(parrep_core::cli::main_with_args(std::env::args_os()));
}
