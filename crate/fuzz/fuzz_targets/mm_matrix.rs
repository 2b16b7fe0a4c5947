#![no_main]

use libfuzzer_sys::fuzz_target;
use tlamg::sparsela::mm;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(a) = mm::parse_matrix(text) {
        let mut out = Vec::new();
        mm::write_matrix(&mut out, &a, false).unwrap();
        let back = mm::parse_matrix(std::str::from_utf8(&out).unwrap()).unwrap();
        assert_eq!(back.shape(), a.shape());
    }
});
