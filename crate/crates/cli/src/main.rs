fn main() {
    std::process::exit(dlp2c::cli::main_with(std::env::args_os().collect()));
}
