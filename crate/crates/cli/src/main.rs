fn main() {
    std::process::exit(ris_locate_cli::run(std::env::args_os()));
}
