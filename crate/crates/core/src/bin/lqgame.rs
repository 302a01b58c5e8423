fn main() -> std::process::ExitCode {
    lqgame::cli::main()
}
