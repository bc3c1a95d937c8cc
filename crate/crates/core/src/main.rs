fn main() {
    eblsim::cli::run();
}
