fn main() {
    std::process::exit(patchnet::cli::patchnet_main(std::env::args_os()));
}
