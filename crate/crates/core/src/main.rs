fn main() {
    std::process::exit(laser::cli::run(std::env::args_os()));
}
