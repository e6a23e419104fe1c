fn main() {
    std::process::exit(ma_continuity::runner::main_with_args(std::env::args_os()));
}
