fn main() {
    std::process::exit(dvhi::cli::main_with_args(std::env::args_os()));
}
