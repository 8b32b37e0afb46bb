fn main() -> std::process::ExitCode {
    theta_isogeny::cli::main()
}
