fn main() {
    std::process::exit(wander::cli::run(std::env::args_os()));
}
