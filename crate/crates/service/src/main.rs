fn main() -> std::process::ExitCode {
    callsent_service::cli::main()
}
