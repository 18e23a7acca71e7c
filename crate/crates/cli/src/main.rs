fn main() {
    std::process::exit(cll_cli::main_entry());
}
