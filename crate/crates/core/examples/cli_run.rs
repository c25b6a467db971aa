//! Drive the command-line front end in-process and check the run manifest it leaves behind.

use morphwing::io::{read_manifest, run_command, verify_manifest};

fn main() {
    let out = std::env::temp_dir().join("morphwing-power-study");
    let _ = std::fs::remove_dir_all(&out);
    let code = run_command(["morphwing", "power-study", "--workers", "1", "--out", out.to_str().expect("utf-8 path")]);
    assert_eq!(code, 0);
    let manifest = read_manifest(&out).expect("manifest");
    println!("run {} ({}), {} files", manifest.run_id, manifest.command, manifest.files.len());
    for f in &manifest.files {
        println!("  {:<34} {}", f.path, &f.sha256[..16]);
    }
    println!("mismatches: {:?}", verify_manifest(&out, &manifest));
}
