fn main() {
    std::process::exit(gsde::harness::run_cli(std::env::args_os()));
}
