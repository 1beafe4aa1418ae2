fn main() {
    std::process::exit(cftrace::cli::main());
}
