fn main() {
    std::process::exit(propeval_cli::cli_dispatch(std::env::args_os()));
}
