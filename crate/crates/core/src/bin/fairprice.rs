fn main() {
    std::process::exit(fairprice::cli::main_with_args(std::env::args_os()));
}
