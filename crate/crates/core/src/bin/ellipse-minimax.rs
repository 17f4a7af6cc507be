fn main() {
    std::process::exit(ellipse_minimax::cli::run(std::env::args_os()));
}
