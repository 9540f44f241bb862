fn main() {
    std::process::exit(qst::cli::run(std::env::args_os()));
}
