fn main() {
    std::process::exit(netoed::cli::main_entry());
}
