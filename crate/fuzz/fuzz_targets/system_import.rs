#![no_main]

//! Input: the files of an exported system in `SYSTEM_FILES` order, separated
//! by NUL bytes.

use std::collections::HashMap;

use libfuzzer_sys::fuzz_target;
use tlamg::system::{import_from_sources, SYSTEM_FILES};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let parts: Vec<&str> = text.split('\0').collect();
    let files: HashMap<&str, &str> = SYSTEM_FILES.iter().copied().zip(parts).collect();
    if let Ok(sys) = import_from_sources(&files) {
        assert_eq!(sys.a.nrows(), sys.split.dim());
        assert_eq!(sys.rhs.len(), sys.split.dim());
    }
});
