#![no_main]

use libfuzzer_sys::fuzz_target;
use qkf::io::parse_manifest;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(manifest) = parse_manifest(text) {
        let _ = manifest.scenario();
        let _ = parse_manifest(&manifest.to_json()).expect("re-parse of written manifest");
    }
});
