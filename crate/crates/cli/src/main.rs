fn main() {
    std::process::exit(hsi_forge::run(std::env::args_os()));
}
