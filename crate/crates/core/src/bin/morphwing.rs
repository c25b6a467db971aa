fn main() {
    std::process::exit(morphwing::io::run_command(std::env::args_os()));
}
