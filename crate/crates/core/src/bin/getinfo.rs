fn main() {
    std::process::exit(patchnet::cli::getinfo_main(std::env::args_os()));
}
