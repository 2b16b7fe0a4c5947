#![no_main]

use libfuzzer_sys::fuzz_target;
use tlamg::system::{parse_manifest, write_manifest};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(m) = parse_manifest(text) {
        assert_eq!(m.split.dim(), m.dim);
        let back = parse_manifest(&write_manifest(&m.split)).unwrap();
        assert_eq!(back.split, m.split);
    }
});
