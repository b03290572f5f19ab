fn main() {
    let code = tssqp::cli::cli_main(std::env::args().collect());
    std::process::exit(code);
}
