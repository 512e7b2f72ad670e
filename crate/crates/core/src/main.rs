fn main() {
    std::process::exit(defgmres::cli::main_exit_code());
}
