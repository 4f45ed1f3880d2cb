fn main() {
    std::process::exit(nlasso_flow::cli::main());
}
