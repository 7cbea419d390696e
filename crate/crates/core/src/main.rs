fn main() -> std::process::ExitCode {
    innerfluc::cli::main()
}
