fn main() {
    std::process::exit(scslab_cli::run(std::env::args_os()));
}
