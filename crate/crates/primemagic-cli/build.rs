use std::process::Command;

fn main() {
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string());
    if let Some(d) = describe {
        println!("cargo:rustc-env=GIT_DESCRIBE={d}");
    }
    println!("cargo:rerun-if-changed=build.rs");
}
