fn main() -> std::process::ExitCode {
    kan_ecoc::cli::main()
}
