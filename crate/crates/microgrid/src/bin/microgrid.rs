fn main() -> std::process::ExitCode {
    microgrid::cli::main()
}
