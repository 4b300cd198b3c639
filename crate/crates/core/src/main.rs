fn main() {
    std::process::exit(pvcurve::cli::run(std::env::args_os()));
}
