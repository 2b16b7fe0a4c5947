#![no_main]

use libfuzzer_sys::fuzz_target;
use tlamg::sparsela::mm;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(x) = mm::parse_vector(text) {
        let mut out = Vec::new();
        mm::write_vector(&mut out, &x).unwrap();
        let back = mm::parse_vector(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back.len(), x.len());
    }
});
