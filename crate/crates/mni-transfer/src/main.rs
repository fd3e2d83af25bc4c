//! Command-line entry point; all logic lives in the library's harness module.

fn main() {
    std::process::exit(mni_transfer::harness::cli_main());
}
