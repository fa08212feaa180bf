fn main() {
    std::process::exit(uavsar::cli::run_from(std::env::args_os()));
}
