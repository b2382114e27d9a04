fn main() {
    std::process::exit(spinmetro_cli::run(std::env::args_os()));
}
