fn main() {
    std::process::exit(qseg::cli::run(std::env::args_os()));
}
