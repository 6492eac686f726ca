fn main() {
    std::process::exit(dae_minimax::cli::run(std::env::args_os()));
}
