fn main() {
    std::process::exit(uxprop::cli::run(std::env::args_os()));
}
