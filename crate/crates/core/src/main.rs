fn main() {
    std::process::exit(godel_lattice::cli::main_with_args(std::env::args_os()));
}
