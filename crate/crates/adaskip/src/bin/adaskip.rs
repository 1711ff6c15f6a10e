fn main() -> std::process::ExitCode {
    adaskip::cli::main()
}
