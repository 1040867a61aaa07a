fn main() {
    std::process::exit(twf_harness::cli::cli_main(std::env::args_os()));
}
