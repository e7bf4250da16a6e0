fn main() {
    std::process::exit(ssra::pipeline::cli::run_cli(std::env::args_os()));
}
