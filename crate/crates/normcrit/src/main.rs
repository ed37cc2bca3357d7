fn main() {
    std::process::exit(normcrit::commands::main_with_args(std::env::args_os()));
}
