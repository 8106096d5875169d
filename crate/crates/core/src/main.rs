fn main() {
    std::process::exit(pbaloc::cli::dispatch(std::env::args_os()));
}
