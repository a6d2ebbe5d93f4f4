fn main() {
    std::process::exit(ivnowcast::cli::main_with(std::env::args_os()));
}
