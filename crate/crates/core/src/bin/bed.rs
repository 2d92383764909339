fn main() -> std::process::ExitCode {
    bed::cli::main()
}
