fn main() {
    std::process::exit(lvsnet::cli::run(std::env::args_os()));
}
