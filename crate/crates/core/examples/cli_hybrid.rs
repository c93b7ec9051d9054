//! Drives the command-line front end in-process, as the `hetbench` binary would.
//!
//! cargo run --example cli_hybrid

fn main() {
    let code = hetbench::cli::run([
        "hetbench", "hybrid", "--model", "box", "--variants", "100", "--steps", "10", "--t-cpu", "1", "--t-accel", "1",
    ]);
    println!("exit code {code}");
}
