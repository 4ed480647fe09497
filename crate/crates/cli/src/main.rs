fn main() {
    std::process::exit(softorder_harness::main_with_args(std::env::args_os()));
}
