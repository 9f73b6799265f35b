//! gl1kit: audits, scans and identity checks for GL(1) harmonic analysis.
//!
//! Usage:
//!   gl1kit <subcommand> [flags] [--config file] [--threads N] [--out path] [--format json|jsonl|csv]
//!
//! Run `gl1kit --help` for the subcommand list. Exit status is 0 on success,
//! 1 when a check fails and 2 on a usage or input error.

fn main() {
    let argv: Vec<String> = std::env::args().collect();
    let code = gl1kit::cli::run(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock());
    std::process::exit(code);
}
