fn main() -> std::process::ExitCode {
    hmm_polar::cli::run()
}
