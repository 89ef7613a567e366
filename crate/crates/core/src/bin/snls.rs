fn main() {
    std::process::exit(snls_chaos::cli::run_command(std::env::args_os()));
}
