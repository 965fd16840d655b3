fn main() {
    std::process::exit(cluster_orient::cli::main_from_args());
}
