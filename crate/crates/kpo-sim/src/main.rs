fn main() {
    std::process::exit(kpo_sim::harness::cli_main());
}
