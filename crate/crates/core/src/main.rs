fn main() {
    std::process::exit(bodesim::cli::main_with_args(std::env::args_os()));
}
