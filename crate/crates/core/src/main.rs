fn main() {
    std::process::exit(slave_spin::cli::run(std::env::args_os()));
}
