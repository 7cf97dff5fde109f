fn main() {
    let code = tpl_bench::cli::run(std::env::args_os());
    std::process::exit(code);
}
