fn main() {
    let code = flw_scope::cli::run(std::env::args_os());
    std::process::exit(code);
}
