fn main() -> std::process::ExitCode {
    cellshed::cli::main()
}
