fn main() {
    hcpfactor::cli::init_logging();
    std::process::exit(hcpfactor::cli::run(std::env::args_os()));
}
