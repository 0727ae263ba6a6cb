fn main() -> std::process::ExitCode {
    metricf::cli::main_entry()
}
