fn main() {
    std::process::exit(spatial_cli::main_with(std::env::args_os()));
}
