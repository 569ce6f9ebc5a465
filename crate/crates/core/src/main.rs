fn main() -> std::process::ExitCode {
    kspace_qa::cli::main()
}
