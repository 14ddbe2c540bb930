fn main() {
    std::process::exit(sparse_lqr::main_with_args(std::env::args_os().collect()));
}
