fn main() -> std::process::ExitCode {
    ocd_mpc::harness::cli::main_with_args(std::env::args_os())
}
