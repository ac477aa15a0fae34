fn main() -> std::process::ExitCode {
    qbplab::cli::main()
}
