fn main() {
    std::process::exit(domt::cli::dispatch(std::env::args_os()));
}
