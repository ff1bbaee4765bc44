fn main() {
    std::process::exit(vsc_ctrl::cli::run(std::env::args_os()));
}
