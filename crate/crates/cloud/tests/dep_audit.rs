//! The cloud service must not be able to decode images, so its dependency
//! tree may not contain an image codec.

use std::process::Command;

const BANNED: [&str; 13] = [
    "image", "png", "jpeg-decoder", "zune-jpeg", "zune-core", "gif", "image-webp", "tiff", "bmp", "qoi", "exr",
    "ravif", "fdeflate",
];

#[test]
fn no_image_codec_in_cloud_tree() {
    let out = Command::new(env!("CARGO"))
        .args(["tree", "-p", "logat-cloud", "-e", "normal", "--prefix", "none", "--offline"])
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("cargo runs");
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let tree = String::from_utf8(out.stdout).unwrap();
    let names: Vec<&str> = tree.lines().filter_map(|l| l.split_whitespace().next()).collect();
    assert!(names.contains(&"logat-core"), "unexpected tree:\n{tree}");
    assert!(names.contains(&"axum"));
    let found: Vec<_> = names.iter().filter(|n| BANNED.contains(n)).collect();
    assert!(found.is_empty(), "image codecs linked into the cloud service: {found:?}");
}

#[test]
fn core_without_media_has_no_image_codec_either() {
    let out = Command::new(env!("CARGO"))
        .args(["tree", "-p", "logat-core", "--no-default-features", "-e", "normal", "--prefix", "none", "--offline"])
        .current_dir(concat!(env!("CARGO_MANIFEST_DIR"), "/../.."))
        .output()
        .expect("cargo runs");
    assert!(out.status.success());
    let tree = String::from_utf8(out.stdout).unwrap();
    assert!(tree.lines().all(|l| !BANNED.contains(&l.split_whitespace().next().unwrap_or(""))));
}
