fn main() {
    std::process::exit(polyreward::cli::main_with(std::env::args_os()));
}
