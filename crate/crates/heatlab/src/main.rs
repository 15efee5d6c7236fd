fn main() {
    std::process::exit(heatlab::run_cli());
}
