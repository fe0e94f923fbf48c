fn main() -> std::process::ExitCode {
    pdac::cli::main()
}
