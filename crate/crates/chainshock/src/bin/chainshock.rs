fn main() {
    std::process::exit(chainshock::cli::main())
}
