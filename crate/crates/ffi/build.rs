use std::env;
use std::fs;
use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("manifest dir"));
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let bindings = cbindgen::Builder::new().with_crate(&dir).with_config(config).generate().expect("generate C header");
    let mut header = Vec::new();
    bindings.write(&mut header);
    let path = dir.join("include").join("fbg_skin.h");
    // Rewrite only on change so the header's mtime stays stable.
    if fs::read(&path).ok().as_deref() != Some(header.as_slice()) {
        fs::create_dir_all(path.parent().expect("include dir")).expect("create include dir");
        fs::write(&path, header).expect("write header");
    }
}
