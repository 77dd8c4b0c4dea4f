fn main() {
    std::process::exit(curvhom::cli::run(std::env::args_os()));
}
