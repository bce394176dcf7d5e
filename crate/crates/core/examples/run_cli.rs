//! Drive the command-line frontend in-process.
//!
//! cargo run --release --example run_cli -- phantom -o /tmp/specimen
//! cargo run --release --example run_cli -- segment --centroid /tmp/specimen/centroid.nrrd \
//!     --membrane /tmp/specimen/membrane.nrrd --background /tmp/specimen/background.nrrd -o /tmp/specimen/sws.nrrd

fn main() -> std::process::ExitCode {
    cellshed::cli::run(std::iter::once("cellshed".to_string()).chain(std::env::args().skip(1)))
}
