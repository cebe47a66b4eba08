fn main() {
    std::process::exit(cplass_tool::run(std::env::args_os()));
}
