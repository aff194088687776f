fn main() {
    std::process::exit(ldplab_cli::run(std::env::args_os()));
}
