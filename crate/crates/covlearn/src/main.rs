fn main() -> std::process::ExitCode {
    covlearn::cli::main_with_args(std::env::args_os())
}
