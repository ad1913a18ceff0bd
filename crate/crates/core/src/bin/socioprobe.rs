fn main() -> std::process::ExitCode {
    socioprobe::cli::main()
}
