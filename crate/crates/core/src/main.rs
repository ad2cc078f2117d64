fn main() {
    std::process::exit(fbg_skin::cli::run(std::env::args_os()));
}
