use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = env::var("CARGO_MANIFEST_DIR").expect("manifest dir");
    let mut config = cbindgen::Config::default();
    config.language = cbindgen::Language::C;
    config.cpp_compat = true;
    config.include_guard = Some("GERMFLOW_H".to_string());
    config.documentation = true;
    config.enumeration.prefix_with_name = true;
    config.header = Some(
        "/* C interface to the germflow laboratory. Generated by cbindgen; do not edit. */"
            .to_string(),
    );

    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write_to_file(PathBuf::from(&crate_dir).join("include").join("germflow.h"));

    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=build.rs");
}
