fn main() {
    let code = kdd_ensemble::cli::run(std::env::args_os());
    std::process::exit(code);
}
