fn main() -> std::process::ExitCode {
    ssl_lab::cli::main_with_args(std::env::args_os())
}
