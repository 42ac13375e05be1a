fn main() {
    gist::configure_threads_from_env();
    std::process::exit(gist::cli::run());
}
