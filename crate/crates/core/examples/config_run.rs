//! Drive the batch front end from Rust, as the `dvhi` binary does.
//!
//! cargo run --release --example config_run -- [config.toml] [out dir]

use std::path::PathBuf;

fn main() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let mut args = std::env::args().skip(1);
    let config = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("configs/viscoplastic.toml"));
    let out = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("dvhi-config-run"));

    let code = dvhi::cli::main_with_args([
        "dvhi".into(),
        "--config".into(),
        config.into_os_string(),
        "--out".into(),
        out.clone().into_os_string(),
    ]);
    println!("exit code {code}");
    match std::fs::read_to_string(out.join("diagnostics.json")) {
        Ok(text) => {
            let diag: serde_json::Value = serde_json::from_str(&text).unwrap();
            println!(
                "status {} | margin {} | outputs {}",
                diag["status"], diag["margin"], diag["outputs"]
            );
            println!("written to {}", out.display());
        }
        Err(e) => println!("no diagnostics: {e}"),
    }
    std::process::exit(code);
}
